"""Command-line entry point: ``qpolar <command> [flags]``.

Every randomized command takes an explicit ``--seed``; identical flags give
byte-identical outputs. Failures print one line
``error=<kind>;code=<exit>;message=<text>`` on stderr and exit with 2 (bad
arguments), 3 (I/O or malformed files) or 4 (model errors).
"""

from __future__ import annotations

import argparse
import csv
import io
import sys

import numpy as np

from . import codec, gain
from .channel import format_channel, parse_channel, qsc_with_entropy, random_channel, sample_joint
from .construction import (
    BudgetExceededError,
    attach_z_bounds,
    dump_codespec,
    estimate_index_stats_mc,
    load_codespec,
    polarization_profile,
    select_frozen,
    track_channels_exact,
    contraction_ratio,
)
from .dist import format_float
from .errors import FormatError, PolarError

EXIT_PARSE, EXIT_IO, EXIT_MODEL = 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _fail("parse", EXIT_PARSE, message)


def _fail(kind, code, message):
    sys.stderr.write(f"error={kind};code={code};message={message}\n")
    sys.exit(code)


def _read_text(path):
    if path in (None, "-"):
        return sys.stdin.read()
    with open(path, encoding="ascii") as fh:
        return fh.read()


def _write(path, data):
    if isinstance(data, str):
        data = data.encode("ascii")
    if path in (None, "-"):
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    else:
        with open(path, "wb") as fh:
            fh.write(data)


def _read_ints(path):
    vals = []
    for ln, line in enumerate(_read_text(path).splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        try:
            vals.append(int(line))
        except ValueError:
            raise FormatError(f"{path}:{ln}: not an integer: {line!r}") from None
    return np.array(vals, dtype=np.int64)


def _ints_text(vals):
    return "".join(f"{int(v)}\n" for v in np.asarray(vals).reshape(-1))


def _csv(header, rows):
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for r in rows:
        wr.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def _channel(args):
    if args.channel:
        ch = parse_channel(_read_text(args.channel))
        if args.q is not None and ch.q != args.q:
            raise PolarError(f"--q {args.q} does not match the channel file (q={ch.q})")
        return ch
    if args.q is None:
        raise PolarError("give --channel or --q")
    return qsc_with_entropy(args.q, args.entropy)


def _stats(args, ch):
    if args.method in ("exact", "auto"):
        try:
            return track_channels_exact(ch, args.n)
        except BudgetExceededError:
            if args.method == "exact":
                raise
    if args.seed is None:
        raise PolarError("Monte Carlo construction needs --seed")
    return estimate_index_stats_mc(ch, args.n, args.samples, args.seed)


# -- commands -------------------------------------------------------------------


def cmd_construct(args):
    ch = _channel(args)
    stats = _stats(args, ch)
    if stats.method == "exact" and args.seed is not None:
        stats.seed = args.seed
    spec = select_frozen(stats, rate=args.rate, threshold=args.threshold)
    _write(args.out, dump_codespec(spec))


def cmd_compress(args):
    spec = load_codespec(_read_text(args.spec))
    x = _read_ints(args.input)
    if x.size % spec.N:
        raise PolarError(f"symbol count {x.size} is not a multiple of the block length {spec.N}")
    payloads = codec.compress_many(x.reshape(-1, spec.N), spec) if x.size else np.zeros((0, len(spec.frozen)), dtype=np.int64)
    _write(args.out, codec.write_stream(payloads, spec.q, spec.n))


def cmd_decompress(args):
    spec = load_codespec(_read_text(args.spec))
    if args.input in (None, "-"):
        data = sys.stdin.buffer.read()
    else:
        with open(args.input, "rb") as fh:
            data = fh.read()
    q, n, payloads, _ = codec.read_stream(data, len(spec.frozen))
    if (q, n) != (spec.q, spec.n):
        raise PolarError("stream and code spec disagree on q or n")
    side = _read_ints(args.side)
    if side.size != payloads.shape[0] * spec.N:
        raise PolarError(f"need {payloads.shape[0] * spec.N} side-information atoms, got {side.size}")
    if payloads.shape[0] == 0:
        _write(args.out, "")
        return
    x, _ = codec.sc_decode_many(payloads, side.reshape(-1, spec.N), spec)
    _write(args.out, _ints_text(x))


def cmd_simulate(args):
    spec = load_codespec(_read_text(args.spec))
    if args.seed is None:
        raise PolarError("simulate needs --seed")
    w = spec.channel
    x, y = sample_joint(w, args.trials * spec.N, args.seed)
    X, Y = x.reshape(args.trials, spec.N), y.reshape(args.trials, spec.N)
    failures = 0
    for s in range(0, args.trials, 256):
        xh, _ = codec.sc_decode_many(codec.compress_many(X[s:s + 256], spec), Y[s:s + 256], spec)
        failures += int(np.any(xh != X[s:s + 256], axis=1).sum())
    rate = failures / args.trials
    se = float(np.sqrt(rate * (1 - rate) / args.trials))
    _write(args.out, _csv(["trials", "failures", "failure_rate", "std_error"],
                          [[args.trials, failures, float(rate), se]]))


def cmd_profile(args):
    ch = _channel(args)
    stats = attach_z_bounds(_stats(args, ch))
    prof = polarization_profile(stats, args.epsilon)
    rows = [[int(i), float(h), float(z), float(t), float(zt)]
            for (i, h, z, t), zt in zip(prof.rows, stats.z_tilde)]
    _write(args.out, _csv(["i", "h_hat", "z_hat", "T", "z_tilde"], rows))
    if args.summary:
        _write(args.summary, _csv(["n", "method", "mean_T", "mean_sqrt_T", "frac_low", "frac_high", "epsilon"],
                                  [[args.n, stats.method, prof.mean_T, prof.mean_sqrt_T, prof.frac_low,
                                    prof.frac_high, prof.epsilon]]))


def cmd_verify(args):
    if args.seed is None:
        raise PolarError("verify-inequalities needs --seed")
    rows = [[r.bound_id, r.inputs, r.lhs, r.rhs, r.margin, "true" if r.passed else "false"]
            for r in gain.sweep(args.q, args.trials, args.seed)]
    _write(args.out, _csv(["bound_id", "inputs", "lhs", "rhs", "margin", "passed"], rows))
    if any(r[-1] == "false" for r in rows):
        _fail("model", EXIT_MODEL, "at least one inequality check failed")


def cmd_alpha(args):
    if args.seed is None:
        raise PolarError("estimate-alpha needs --seed")
    g = gain.estimate_alpha(args.q, args.trials, args.seed, args.refine)
    alpha = "" if g.alpha_estimate is None else g.alpha_estimate
    text = _csv(["q", "gamma0", "c", "alpha_estimate", "evaluated"], [[args.q, g.gamma0, g.c, alpha, g.evaluated]])
    if g.minimizer is not None:
        if args.channel_out:
            _write(args.channel_out, format_channel(g.minimizer))
        else:
            text += "\n" + format_channel(g.minimizer)
    _write(args.out, text)


def cmd_contraction(args):
    if args.seed is None:
        raise PolarError("contraction needs --seed")
    rows = []
    for k, q in enumerate(args.qs):
        rng = np.random.default_rng([args.seed, q])
        ratios = []
        for _ in range(args.trials):
            r = contraction_ratio(random_channel(q, 8, seed=rng))
            if r is not None:
                ratios.append(r)
        rows.append([q, len(ratios), float(max(ratios)) if ratios else "", float(np.mean(ratios)) if ratios else ""])
    _write(args.out, _csv(["q", "channels", "lambda_hat", "mean_ratio"], rows))


def _q_list(text):
    try:
        vals = [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if any(v < 2 for v in vals):
        raise argparse.ArgumentTypeError("alphabet sizes must be at least 2")
    return vals


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qpolar", description="Polar codes over prime and composite alphabets.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def model_flags(sp, need_n=True):
        sp.add_argument("--q", type=int)
        sp.add_argument("--channel", help="channel text file (default: q-ary symmetric channel)")
        sp.add_argument("--entropy", type=float, default=0.5, help="H(W) of the default channel")
        if need_n:
            sp.add_argument("--n", type=int, required=True)
        sp.add_argument("--method", choices=["auto", "exact", "mc"], default="auto")
        sp.add_argument("--samples", type=_positive, default=10_000)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", default="-")

    sp = sub.add_parser("construct", help="build a code spec")
    model_flags(sp)
    grp = sp.add_mutually_exclusive_group(required=True)
    grp.add_argument("--rate", type=float)
    grp.add_argument("--threshold", type=float)
    sp.set_defaults(fn=cmd_construct)

    sp = sub.add_parser("compress", help="symbols -> compressed stream")
    sp.add_argument("--spec", required=True)
    sp.add_argument("--in", dest="input", default="-")
    sp.add_argument("--out", default="-")
    sp.set_defaults(fn=cmd_compress)

    sp = sub.add_parser("decompress", help="compressed stream + side information -> symbols")
    sp.add_argument("--spec", required=True)
    sp.add_argument("--in", dest="input", default="-")
    sp.add_argument("--side", required=True, help="one output-atom index per line")
    sp.add_argument("--out", default="-")
    sp.set_defaults(fn=cmd_decompress)

    sp = sub.add_parser("simulate", help="empirical block failure rate of a spec")
    sp.add_argument("--spec", required=True)
    sp.add_argument("--trials", type=_positive, required=True)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", default="-")
    sp.set_defaults(fn=cmd_simulate)

    sp = sub.add_parser("profile", help="per-index polarization profile")
    model_flags(sp)
    sp.add_argument("--epsilon", type=float, default=0.05)
    sp.add_argument("--summary", help="write aggregate statistics here")
    sp.set_defaults(fn=cmd_profile)

    sp = sub.add_parser("verify-inequalities", help="random sweep over the inequality catalog")
    sp.add_argument("--q", type=int, required=True)
    sp.add_argument("--trials", type=_positive, required=True)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", default="-")
    sp.set_defaults(fn=cmd_verify)

    sp = sub.add_parser("estimate-alpha", help="empirical conditional-gain constant")
    sp.add_argument("--q", type=int, required=True)
    sp.add_argument("--trials", type=_positive, required=True)
    sp.add_argument("--refine", type=int, default=200)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", default="-")
    sp.add_argument("--channel-out")
    sp.set_defaults(fn=cmd_alpha)

    sp = sub.add_parser("contraction", help="sweep of the sqrt(T) contraction ratio")
    sp.add_argument("--q", dest="qs", type=_q_list, default=[2, 3, 5])
    sp.add_argument("--trials", type=_positive, default=1000)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", default="-")
    sp.set_defaults(fn=cmd_contraction)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.fn(args)
    except BrokenPipeError:
        sys.stderr.close()
        return 0
    except FormatError as exc:
        _fail("format", EXIT_IO, str(exc))
    except OSError as exc:
        _fail("io", EXIT_IO, str(exc))
    except PolarError as exc:
        _fail("model", EXIT_MODEL, str(exc))
    return 0


if __name__ == "__main__":
    sys.exit(main())
