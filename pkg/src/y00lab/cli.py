"""Command-line experiment runner.

    y00lab simulate|fca|qdetect|classical-break|paper-example
           [--config PATH] [--seed N] [--out DIR] [--override key=value ...]

Exit codes: 0 success, 1 configuration/usage error, 2 security condition
violated (fca only).
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import math
import sys
from pathlib import Path

import numpy as np
from scipy import special

from y00lab import __version__
from y00lab import channel, fca, keystream, qdetect, y00core
from y00lab.config import (ExperimentConfig, RunManifest, atomic_write, canonical_json,
                           load_config, substream)
from y00lab.errors import Y00LabError

EXIT_OK, EXIT_CONFIG, EXIT_VIOLATED = 0, 1, 2
MAX_HYPOTHESES, MAX_FRAME_SLOTS = 64, 16


class Result:
    """What a command produced: the JSON report, extra CSV files and an exit code."""

    def __init__(self, report: dict, csvs: dict[str, str] | None = None, code: int = EXIT_OK):
        self.report = report
        self.csvs = csvs or {}
        self.code = code


def _keys(cfg: ExperimentConfig, rng: np.random.Generator, count: int = 1):
    bits = cfg.key_bits
    if cfg.prng == "tinymt32" and bits > 32:
        raise Y00LabError("tinymt32 seeds are at most 32 bits; lower key_bits")
    lo = 1 if cfg.prng == "lfsr" else 0
    out = []
    for _ in range(count):
        k, dk = (int(v) for v in rng.integers(lo, 1 << bits, size=2))
        out.append(keystream.KeyPair.from_ints(k, dk, bits))
    return out


def _setup(cfg: ExperimentConfig):
    constellation = y00core.Constellation.build(cfg.scheme, cfg.M, cfg.alpha0)
    mapping = y00core.MappingTable.from_spec(cfg.mapping, cfg.M)
    return constellation, mapping


def _rows_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def run_simulate(cfg: ExperimentConfig) -> Result:
    T, M = cfg.slots, cfg.M
    width = keystream.symbol_width(M)
    if T == 0:
        return Result({"slots": 0, "note": "empty transmission"},
                      {"simulate_patterns.csv": _rows_csv(["pattern_bits", "observed_count",
                                                           "observed_rate", "theory_probability"], [])})
    constellation, mapping = _setup(cfg)
    if cfg.k_seed is not None and cfg.dk_seed is not None:
        pair = keystream.KeyPair.from_ints(cfg.k_seed, cfg.dk_seed, cfg.key_bits)
    else:
        pair = _keys(cfg, substream(cfg.seed, "keys"))[0]
    stream = keystream.expand_keys(pair, M, T, cfg.prng)
    x = substream(cfg.seed, "plaintext").integers(0, 2, T)
    frame = y00core.encode_frame(x, stream, mapping)
    sent = cfg.eta * constellation.amplitudes[frame.m]
    if cfg.channel == "noiseless":
        y = sent
    else:
        y = channel.heterodyne_sample(sent, substream(cfg.seed, "channel"), T)

    x_bob = y00core.bob_decode(y, stream.s, stream.dx, mapping, constellation, cfg.eta)
    bob_errors = int(np.sum(x_bob != x))

    m_eve = channel.ml_decide(y, constellation, cfg.eta)
    s_eve, dx_eve = y00core.invert_indices(m_eve, x, mapping)
    s_err, dx_err = s_eve ^ stream.s, dx_eve ^ stream.dx
    patterns = (dx_err << width) | s_err
    bit_errors = np.array([bin(int(v)).count("1") for v in s_err]) + dx_err
    counts = np.bincount(patterns, minlength=1 << (width + 1))

    report = {
        "slots": T,
        "M": M,
        "bob_bit_errors": bob_errors,
        "bob_ber": bob_errors / T,
        "bob_ber_stderr": math.sqrt(max(bob_errors / T * (1 - bob_errors / T), 0) / T),
        "eve_symbol_error": float(np.mean(m_eve != frame.m)),
        "eve_bit_error": float(np.sum(bit_errors) / (T * (width + 1))),
        "eve_bit_error_running_key": float(np.mean([bin(int(v)).count("1") for v in s_err]) / width) if width else 0.0,
        "eve_bit_error_dx": float(np.mean(dx_err)),
    }
    theory = np.full(len(counts), float("nan"))
    if cfg.theory:
        a0 = cfg.eta * constellation.amplitudes[y00core.encode_indices(stream.s, 0, stream.dx, mapping)]
        a1 = cfg.eta * constellation.amplitudes[y00core.encode_indices(stream.s, 1, stream.dx, mapping)]
        if cfg.channel == "noiseless":
            report["bob_ber_theory"] = 0.0
            report["eve_symbol_error_theory"] = 0.0
            theory = np.zeros(len(counts))
            theory[0] = 1.0
        else:
            # two keyed states at distance d: error = Q(d / (2 sigma)), sigma^2 = 1/2
            report["bob_ber_theory"] = float(np.mean(0.5 * special.erfc(np.abs(a0 - a1) / 2)))
            conf = channel.confusion_matrix(constellation, channel.NoiseModel(cfg.eta))
            report["eve_symbol_error_theory"] = conf.symbol_error()
            agg = channel.aggregate_error_dist(channel.slot_error_dists(conf, mapping))
            theory = agg.dist.p
    rows = [[format(e, f"0{width + 1}b"), int(c), float(c) / T, float(theory[e])]
            for e, c in enumerate(counts)]
    return Result(report, {"simulate_patterns.csv": _rows_csv(
        ["pattern_bits", "observed_count", "observed_rate", "theory_probability"], rows)})


def _error_dist(cfg: ExperimentConfig):
    width = keystream.symbol_width(cfg.M) + 1
    if cfg.error_dist:
        dist = channel.ErrorPatternDist.from_csv(Path(cfg.error_dist).read_text(), tag=cfg.error_dist)
        return dist, None
    if cfg.channel == "noiseless":
        p = np.zeros(1 << width)
        p[0] = 1.0
        return channel.ErrorPatternDist(width, p, "noiseless"), None
    constellation, mapping = _setup(cfg)
    conf = channel.confusion_matrix(constellation, channel.NoiseModel(cfg.eta))
    agg = channel.aggregate_error_dist(channel.slot_error_dists(conf, mapping))
    return agg.dist, (agg.p_min, agg.p_max)


def run_fca(cfg: ExperimentConfig) -> Result:
    dist, envelope = _error_dist(cfg)
    if cfg.blocks is not None:
        N = cfg.big("blocks")
    else:
        t_lcm = cfg.big("t_lcm") if cfg.t_lcm is not None else cfg.slots
        N = keystream.block_count(t_lcm, 1 << (dist.width - 1))
    acceptance = cfg.acceptance
    if isinstance(acceptance, dict):
        acceptance = {int(k, 2) if isinstance(k, str) else int(k): v for k, v in acceptance.items()}
    report = fca.analyze(dist, fca.AnalysisConfig(N=N, eps=cfg.eps_value(), acceptance=acceptance,
                                                  envelope=envelope, label=cfg.channel))
    code = EXIT_OK if report.secure else EXIT_VIOLATED
    return Result(report.to_json(), {"fca_patterns.csv": report.to_csv(),
                                     "error_dist.csv": dist.to_csv()}, code)


def run_paper_example(cfg: ExperimentConfig | None = None) -> Result:
    ex = fca.paper_example()
    out = ex.to_json()
    # ideal design target: every pattern, including e = 0, at exactly 1/(2M)
    budget = fca.security_budget(ex.eps, ex.N, {e: ex.a for e in range(1, 2 * ex.M)})
    verdict = fca.security_condition(budget, p0=ex.a)
    out["uniform_design"] = {
        "p0": fca._fmt(ex.a),
        "margin": fca._fmt(budget.margin, 40),
        "satisfied": verdict.satisfied,
        "message": verdict.message,
    }
    csv_text = _rows_csv(["quantity", "value"], [
        ["M", ex.M], ["N", ex.N], ["delta", fca._fmt(ex.delta)],
        ["margin_reduction", fca._fmt(ex.reduction)], ["p0_ceiling", fca._fmt(ex.p0_ceiling, 40)],
    ])
    return Result(out, {"paper_example.csv": csv_text})


def run_qdetect(cfg: ExperimentConfig) -> Result:
    constellation, mapping = _setup(cfg)
    if cfg.frames is not None:
        frames = [list(map(int, f)) for f in cfg.frames]
        K, T = len(frames), len(frames[0]) if frames else 0
    else:
        K, T = cfg.hypotheses, cfg.frame_slots
    if K > MAX_HYPOTHESES or T > MAX_FRAME_SLOTS:
        raise Y00LabError(f"ensemble too large for an explicit Gram matrix: K={K} (max {MAX_HYPOTHESES}), "
                          f"T={T} (max {MAX_FRAME_SLOTS})")
    if K < 2:
        raise Y00LabError("need at least two hypotheses")
    if cfg.frames is None:
        x = substream(cfg.seed, "plaintext").integers(0, 2, T)
        pairs = _keys(cfg, substream(cfg.seed, "hypotheses"), K)
        frames = [y00core.encode_frame(x, keystream.expand_keys(p, cfg.M, T, cfg.prng), mapping).m
                  for p in pairs]
    ens = qdetect.gram_from_frames(frames, constellation, cfg.eta)
    det = qdetect.srm_success(ens)
    report = {"K": K, "T": T, "method": det.method, "success_total": det.success,
              "margin": det.margin, "min_eigenvalue": ens.min_eigenvalue(),
              "strictly_below_one": bool(det.margin > 0)}
    if K == 2:
        ov = float(abs(ens.G[0, 1]) ** 2)
        report["helstrom"] = qdetect.helstrom_binary(0.5, 0.5, ov)
        report["helstrom_margin"] = qdetect.helstrom_binary_margin(0.5, 0.5, ov)
    return Result(report, {"detection.csv": det.to_csv()})


def run_classical_break(cfg: ExperimentConfig) -> Result:
    L = cfg.lfsr_length
    taps = frozenset(cfg.lfsr_taps) if cfg.lfsr_taps else keystream.PRIMITIVE_TAPS.get(L)
    if taps is None:
        raise Y00LabError(f"no built-in primitive taps for length {L}; set lfsr_taps")
    observed = 2 * L if cfg.observed_bits is None else cfg.observed_bits
    if observed <= 0:
        return Result({"recovered": False, "reason": "insufficient", "observed_bits": observed,
                       "lfsr_length": L, "trials": 0, "successes": 0})
    rng = substream(cfg.seed, "classical-break")
    successes, rows, first = 0, [], None
    for trial in range(cfg.trials):
        state = int(rng.integers(1, 1 << L))
        spec = keystream.LfsrSpec(L, taps, state)
        bits = keystream.lfsr_generate(spec.copy(), observed)
        rec = keystream.bm_recover_lfsr(bits)
        ok = (not rec.ambiguous and rec.determined and rec.length == L
              and rec.taps == taps and rec.state == state)
        successes += ok
        first = first or rec
        rows.append([trial, state, rec.length, " ".join(map(str, sorted(rec.taps))), rec.state, ok])
    report = {
        "recovered": successes == cfg.trials,
        "reason": "ok" if successes == cfg.trials else ("insufficient" if observed < 2 * L else "mismatch"),
        "lfsr_length": L,
        "taps": sorted(taps),
        "recovered_taps": sorted(first.taps) if first else [],
        "observed_bits": observed,
        "trials": cfg.trials,
        "successes": successes,
    }
    return Result(report, {"classical_break.csv": _rows_csv(
        ["trial", "true_state", "recovered_length", "recovered_taps", "recovered_state", "ok"], rows)})


COMMANDS = {
    "simulate": run_simulate,
    "fca": run_fca,
    "qdetect": run_qdetect,
    "classical-break": run_classical_break,
    "paper-example": run_paper_example,
}


def execute(command: str, cfg: ExperimentConfig) -> Result:
    """Run one command and write its outputs under ``cfg.out``."""
    manifest = RunManifest(command, cfg.to_dict(), cfg.seed)
    result = COMMANDS[command](cfg)
    result.report = {"command": command, "manifest_hash": manifest.digest, "version": __version__,
                     **result.report}
    out = Path(cfg.out)
    atomic_write(out / "report.json", canonical_json(result.report))
    manifest.outputs["report.json"] = str(out / "report.json")
    for name, text in result.csvs.items():
        atomic_write(out / name, text)
        manifest.outputs[name] = str(out / name)
    manifest.finished = _dt.datetime.now(_dt.timezone.utc).isoformat()
    atomic_write(out / "manifest.json", canonical_json(manifest.to_dict()))
    return result


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="y00lab", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--out", help="output directory")
        p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                       help="override one config key (JSON value); repeatable, wins over the file")
        if name == "fca":
            p.add_argument("--paper-example", action="store_true",
                           help="run the frozen full-scale numerical example instead")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    command = args.command
    if getattr(args, "paper_example", False):
        command = "paper-example"
    try:
        cfg = load_config(args.config, args.override, args.seed, args.out)
        result = execute(command, cfg)
    except Y00LabError as exc:
        print(f"y00lab {command}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(canonical_json(result.report), end="")
    return result.code


if __name__ == "__main__":
    sys.exit(main())
