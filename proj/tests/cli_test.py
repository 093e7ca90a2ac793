#!/usr/bin/env python3
"""End-to-end checks for the stdrive command line tool.

Usage: cli_test.py /path/to/stdrive
"""

import os
import subprocess
import sys
import tempfile

BIN = os.path.abspath(sys.argv[1])
FAILURES = []


def run(*args, env_extra=None, cwd=None):
    env = dict(os.environ)
    env = {k: v for k, v in env.items() if not k.startswith("STDRIVE_")}
    if env_extra:
        env.update(env_extra)
    return subprocess.run([BIN, *args], capture_output=True, text=True, env=env, cwd=cwd)


def check(name, cond, detail=""):
    if cond:
        print(f"ok   {name}")
    else:
        print(f"FAIL {name} {detail}")
        FAILURES.append(name)


def read(path, mode="r"):
    with open(path, mode) as f:
        return f.read()


def manifest_option(path, key):
    for line in read(path).splitlines():
        if line.startswith(f"option.{key}="):
            return line.split("=", 1)[1]
    return None


def main():
    tmp = tempfile.mkdtemp(prefix="stdrive_cli_")
    os.chdir(tmp)

    # usage errors
    r = run()
    check("no subcommand exits 2", r.returncode == 2, r.stderr)
    r = run("frobnicate")
    check("unknown subcommand exits 2", r.returncode == 2, r.stderr)
    r = run("gen-data", "--out", "x.stdc", "--domain", "atlantis", "--n", "4",
            "--height", "16", "--width", "16", "--seq-len", "3")
    check("bad domain exits 2", r.returncode == 2, r.stderr)
    check("bad domain names the problem", "domain" in r.stderr, r.stderr)
    r = run("gen-data", "--domain", "townA")
    check("missing required --out exits 2", r.returncode == 2, r.stderr)

    # runtime errors
    r = run("eval", "--model", "missing.stdm", "--data", "missing.stdc")
    check("missing files exit 1", r.returncode == 1, r.stderr)

    small = ["--n", "8", "--height", "16", "--width", "16", "--seq-len", "3"]

    # dataset generation is deterministic; the manifest carries the timestamp
    r = run("gen-data", "--out", "a.stdc", "--domain", "townA", "--seed", "5", *small)
    check("gen-data exits 0", r.returncode == 0, r.stderr)
    check("gen-data writes manifest", os.path.exists("a.stdc.manifest"))
    r = run("gen-data", "--out", "a2.stdc", "--domain", "townA", "--seed", "5", *small)
    check("same seed regenerates identical bytes",
          read("a.stdc", "rb") == read("a2.stdc", "rb"))
    r = run("gen-data", "--out", "b.stdc", "--domain", "townB", "--seed", "6", *small)
    check("second domain generates", r.returncode == 0, r.stderr)

    # option layering: flag > environment > config file > default
    with open("gen.cfg", "w") as f:
        f.write("# comment\nn=4\nseed=5\n")
    r = run("gen-data", "--out", "c1.stdc", "--domain", "townA", "--config", "gen.cfg",
            "--height", "16", "--width", "16", "--seq-len", "3")
    check("config file supplies n", manifest_option("c1.stdc.manifest", "n") == "4", r.stderr)
    r = run("gen-data", "--out", "c2.stdc", "--domain", "townA", "--config", "gen.cfg",
            "--height", "16", "--width", "16", "--seq-len", "3",
            env_extra={"STDRIVE_N": "6"})
    check("environment beats config file", manifest_option("c2.stdc.manifest", "n") == "6",
          r.stderr)
    r = run("gen-data", "--out", "c3.stdc", "--domain", "townA", "--config", "gen.cfg",
            "--height", "16", "--width", "16", "--seq-len", "3", "--n", "8",
            env_extra={"STDRIVE_N": "6"})
    check("flag beats environment", manifest_option("c3.stdc.manifest", "n") == "8", r.stderr)
    with open("bad.cfg", "w") as f:
        f.write("bogus_key=1\n")
    r = run("gen-data", "--out", "c4.stdc", "--domain", "townA", "--config", "bad.cfg", *small)
    check("unknown config key exits 2", r.returncode == 2, r.stderr)
    check("unknown config key is located", "bad.cfg:1" in r.stderr, r.stderr)

    # phase 1 training with bundle harvest and history
    r = run("train-phase1", "--data", "a.stdc", "--out", "m1.stdm", "--epochs", "1",
            "--batch", "4", "--seed", "7", "--bundle-out", "m1.stdb",
            "--history", "m1.tsv", "--log-every", "0")
    check("train-phase1 exits 0", r.returncode == 0, r.stderr)
    check("checkpoint written", os.path.exists("m1.stdm"))
    check("bundle written", os.path.exists("m1.stdb"))
    hist = read("m1.tsv").splitlines()
    check("history has header plus one row",
          len(hist) == 2 and hist[0].startswith("epoch\tloss"), hist)

    r = run("eval", "--model", "m1.stdm", "--data", "b.stdc")
    check("eval exits 0", r.returncode == 0, r.stderr)
    check("eval prints accuracy", "accuracy" in r.stdout, r.stdout)

    # salient map attachment, then phase 2 consuming the augmented channels
    r = run("gen-salient", "--model", "m1.stdm", "--data", "b.stdc", "--out", "b6.stdc",
            "--ratio", "0.25", "--seed", "3")
    check("gen-salient exits 0", r.returncode == 0, r.stderr)
    check("gen-salient reports coverage", "2" in r.stdout, r.stdout)
    r = run("train-phase2", "--bundle", "m1.stdb", "--data", "b6.stdc", "--out", "m2.stdm",
            "--channels", "6", "--salient-ratio", "0.25", "--epochs", "1", "--batch", "4",
            "--seed", "9", "--log-every", "0")
    check("train-phase2 exits 0", r.returncode == 0, r.stderr)
    r = run("eval", "--model", "m2.stdm", "--data", "b6.stdc")
    check("phase-2 model evaluates", r.returncode == 0, r.stderr)

    # ablation flags are accepted and change the initialization
    r = run("train-phase2", "--bundle", "m1.stdb", "--data", "b.stdc", "--out", "m3.stdm",
            "--channels", "3", "--epochs", "1", "--batch", "4", "--seed", "9",
            "--log-every", "0", "--no-lstm-transfer")
    check("train-phase2 ablation exits 0", r.returncode == 0, r.stderr)
    r = run("train-phase2", "--bundle", "m1.stdb", "--data", "b.stdc", "--out", "m4.stdm",
            "--channels", "6", "--salient-ratio", "0.25", "--epochs", "1", "--batch", "4",
            "--seed", "9", "--log-every", "0")
    check("coverage mismatch exits 2", r.returncode == 2, r.stderr)

    r = run("similarity", "--model", "m1.stdm", "--ref", "a.stdc", "--cand", "b.stdc",
            "--pairs", "12", "--seed", "4")
    check("similarity exits 0", r.returncode == 0, r.stderr)
    check("similarity prints the three metrics",
          all(k in r.stdout for k in ("cosine", "ssim", "fid")), r.stdout)

    # experiment reports: tsv + table + manifest, bit-identical on re-run
    exp = ["experiment", "scenario", "--out-dir", "rep1", "--root-seed", "5",
           "--set", "ref_n=3", "--set", "probe_n=3", "--set", "train_n=6",
           "--set", "epochs=1", "--set", "batch=4", "--set", "frame_h=16",
           "--set", "frame_w=16", "--set", "seq_len=3"]
    r = run(*exp)
    check("experiment exits 0", r.returncode == 0, r.stderr)
    check("experiment prints the table", "collision conf" in r.stdout, r.stdout)
    for ext in ("tsv", "txt", "manifest"):
        check(f"experiment writes .{ext}", os.path.exists(f"rep1/scenario.{ext}"))
    r = run(*[a if a != "rep1" else "rep2" for a in exp])
    check("re-run reproduces the tsv bit-exactly",
          read("rep1/scenario.tsv", "rb") == read("rep2/scenario.tsv", "rb"))
    r = run("experiment", "scenario", "--out-dir", "rep3", "--set", "bogus=1")
    check("unknown experiment knob exits 2", r.returncode == 2, r.stderr)
    r = run("experiment", "nonsense", "--out-dir", "rep3")
    check("unknown experiment name exits 2", r.returncode == 2, r.stderr)

    print(f"\n{'all checks passed' if not FAILURES else f'{len(FAILURES)} checks FAILED'}")
    return 1 if FAILURES else 0


if __name__ == "__main__":
    sys.exit(main())
