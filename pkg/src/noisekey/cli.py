"""Command-line experiment runner.

Subcommands generate delimited data files (and matching PNG figures)
for the randomness statistics, the attacker-error grid and the
post-amplification information surface, and operate full key-exchange
sessions in one process or across two.
"""

from __future__ import annotations

import argparse
import math
import sys
import threading
from pathlib import Path

import numpy as np

from . import channel, plots, rngsim, security
from .bitutils import bits_from_file, bits_to_file, hex_to_bits
from .errors import FitError, NoiseKeyError, ParameterError
from .params import SystemParams, params_from_config, parse_config
from .protocol import SessionConfig, build_stations, run_session, run_station

EPSILON_GATE = 0.01
EPSILON_GATE_MIN_BITS = 10 ** 6
FLATNESS_GATE = 6.0


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_int_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ParameterError(f"bad integer list {text!r}") from exc


def _parse_float_list(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ParameterError(f"bad number list {text!r}") from exc


# ---------------------------------------------------------------------------
# rng-test


def cmd_rng_test(args) -> int:
    out = _out_dir(args)
    failures = []

    if args.hist_csv:
        hist = rngsim.histogram_from_csv(args.hist_csv)
        try:
            fit = rngsim.fit_run_lengths(hist)
        except FitError as exc:
            print(f"fit failed: {exc}")
            return 1
        rngsim.fit_to_csv(fit, out / "fit.csv")
        print(f"fit: c = {fit.c:.1f} +- {fit.c_err:.1f}, "
              f"epsilon = {fit.epsilon:.5f} +- {fit.epsilon_err:.5f}")
        if not args.no_plots:
            plots.plot_run_lengths({"input": hist}, {"input": fit},
                                   out / "run_lengths.png")
        if abs(fit.epsilon) > EPSILON_GATE:
            print(f"GATE FAIL: |epsilon| = {abs(fit.epsilon):.5f} "
                  f"> {EPSILON_GATE}")
            return 1
        print("GATE PASS")
        return 0

    n = args.bits
    if args.bits_in:
        bits = bits_from_file(args.bits_in)
        n = bits.size
        print(f"loaded {n} bits from {args.bits_in}")
    else:
        source = rngsim.ShotNoiseSource(mean_level=1000.0,
                                        mean_photons=args.mean_photons,
                                        seed=args.seed)
        whitener = rngsim.LfsrWhitener.from_seed(args.seed)
        bits = rngsim.generate_bits(source, n, whitener=whitener)
        print(f"generated {n} bits (seed {args.seed})")
    if args.bits_out:
        bits_to_file(bits, args.bits_out)

    hists, fits = {}, {}
    for label, symbol in (("ones", 1), ("zeros", 0)):
        hist = rngsim.run_length_histogram(bits, symbol)
        hists[label] = hist
        rngsim.histogram_to_csv(hist, out / f"run_lengths_{label}.csv")
        try:
            fit = rngsim.fit_run_lengths(hist)
        except FitError as exc:
            failures.append(f"{label}: fit failed ({exc})")
            continue
        fits[label] = fit
        rngsim.fit_to_csv(fit, out / f"fit_{label}.csv")
        print(f"{label}: c = {fit.c:.1f} +- {fit.c_err:.1f}, "
              f"epsilon = {fit.epsilon:.5f} +- {fit.epsilon_err:.5f}")
        if n >= EPSILON_GATE_MIN_BITS and abs(fit.epsilon) > EPSILON_GATE:
            failures.append(
                f"{label}: |epsilon| = {abs(fit.epsilon):.5f} > {EPSILON_GATE}")

    spectrum = None
    pow2 = 1 << (n.bit_length() - 1)
    if pow2 >= 1024:
        spectrum = rngsim.spectrum_flatness(bits[:pow2])
        with open(out / "spectrum.csv", "w") as fh:
            fh.write("bin,rel_amplitude\n")
            stride = max(1, len(spectrum.rel_amplitude) // 4096)
            for i in range(0, len(spectrum.rel_amplitude), stride):
                fh.write(f"{i},{spectrum.rel_amplitude[i]!r}\n")
        print(f"spectrum ({pow2} bits): mean = {spectrum.mean_amplitude:.3f},"
              f" max/mean = {spectrum.max_over_mean:.2f} "
              f"(gate {FLATNESS_GATE}x)")
        if not spectrum.passes(FLATNESS_GATE):
            failures.append(
                f"spectrum: max/mean = {spectrum.max_over_mean:.2f} "
                f"> {FLATNESS_GATE}")

    if not args.no_plots:
        plots.plot_run_lengths(hists, fits, out / "run_lengths.png")
        if spectrum is not None:
            plots.plot_spectrum(spectrum, out / "spectrum.png")

    if failures:
        for line in failures:
            print(f"GATE FAIL: {line}")
        return 1
    print("GATE PASS")
    return 0


# ---------------------------------------------------------------------------
# attacker-sweep


def cmd_attacker_sweep(args) -> int:
    out = _out_dir(args)
    rows = security.attacker_sweep(
        _parse_int_list(args.m_values),
        _parse_float_list(args.photon_values),
        trials=args.trials, seed=args.seed, s=args.s, lam=args.lam)
    security.sweep_to_csv(rows, out / "attacker_sweep.csv")
    for r in rows:
        print(f"M={r.M:5d} <n>={r.mean_photons:8g} "
              f"Pe_analytic={r.p_e_analytic:.6f} "
              f"Pe_empirical={r.p_e_empirical:.6f} "
              f"CI=[{r.ci_low:.6f},{r.ci_high:.6f}] t={r.t}")
    if not args.no_plots:
        plots.plot_attacker_sweep(rows, out / "attacker_sweep.png")
    print(f"wrote {out / 'attacker_sweep.csv'}")
    return 0


# ---------------------------------------------------------------------------
# pa-sweep


def cmd_pa_sweep(args) -> int:
    out = _out_dir(args)
    n = args.n
    t_values = _parse_int_list(args.t_values)
    r_values = (_parse_int_list(args.r_values) if args.r_values else
                [n - d for d in (400, 300, 200, 150, 100, 50, 0)])
    rows = []
    skipped = 0
    path = out / "pa_sweep.csv"
    with open(path, "w") as fh:
        fh.write("n,t,r,lambda,log10_i_lambda,note\n")
        for t in t_values:
            for r in r_values:
                lam = n - t - r
                if r + t > n:
                    fh.write(f"{n},{t},{r},,,skipped: r + t > n\n")
                    skipped += 1
                    continue
                i_lam = security.mutual_information(lam)
                log10_i = math.log10(i_lam)
                rows.append({"n": n, "t": t, "r": r, "lam": lam,
                             "log10_i_lambda": log10_i})
                fh.write(f"{n},{t},{r},{lam},{log10_i!r},\n")
    print(f"{len(rows)} points, {skipped} skipped (r + t > n)")
    if rows and not args.no_plots:
        plots.plot_pa_surface(rows, out / "pa_sweep.png")
    print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# session


def _session_config(args) -> SessionConfig:
    cfg = parse_config(args.config) if args.config else {}
    params = params_from_config(cfg) if cfg else SystemParams()
    rounds = args.rounds if args.rounds is not None else cfg.get("rounds", 10)
    seed_a = args.seed if args.seed is not None else cfg.get("seed_a", 1)
    seed_b = cfg.get("seed_b", seed_a + 1)
    c0 = hex_to_bits(cfg["c0_hex"]) if "c0_hex" in cfg else None
    if c0 is not None:
        c0 = c0[:params.m * params.s]
    return SessionConfig(params=params, rounds=rounds, seed_a=seed_a,
                         seed_b=seed_b, c0=c0,
                         record_traffic=args.tap)


def _write_session_outputs(out: Path, report) -> None:
    bits_to_file(report.key_a, out / "key_a.bin")
    bits_to_file(report.key_b, out / "key_b.bin")
    with open(out / "session_report.csv", "w") as fh:
        fh.write("rounds,total_key_bits,mismatches,t,lambda,log10_i_lambda\n")
        lk = report.leakage[0] if report.leakage else None
        fh.write(f"{report.rounds},{report.total_key_bits},"
                 f"{report.mismatches},"
                 f"{lk.t if lk else ''},{lk.lam if lk else ''},"
                 f"{math.log10(lk.i_lambda) if lk else ''}\n")


def cmd_session(args) -> int:
    out = _out_dir(args)

    if args.listen or args.connect:
        return _session_split(args, out)

    config = _session_config(args)
    tap = channel.Tap() if args.tap else None
    if args.transport == "socket":
        ep_a, ep_b = channel.socket_pair(tap_a_to_b=tap)
        a, b = build_stations(config)
        err: list[BaseException] = []

        def _run(st, ep):
            try:
                run_station(st, ep, config.rounds)
            except BaseException as exc:  # propagated after join
                err.append(exc)

        th = threading.Thread(target=_run, args=(b, ep_b))
        th.start()
        _run(a, ep_a)
        th.join()
        if err:
            raise err[0]
        mismatches = int(np.count_nonzero(a.key_bits != b.key_bits)) \
            if a.key_bits.size == b.key_bits.size else -1
        from .protocol import SessionReport
        report = SessionReport(rounds=config.rounds,
                               total_key_bits=int(a.key_bits.size),
                               mismatches=mismatches,
                               leakage=[security.leakage_estimate(
                                   config.params)] * config.rounds,
                               key_a=a.key_bits, key_b=b.key_bits,
                               sent_bits=a.sent_bits)
    else:
        report = run_session(config, tap=tap)

    _write_session_outputs(out, report)
    print(f"{report.rounds} rounds, {report.total_key_bits} key bits per "
          f"station, {report.mismatches} mismatches")
    if report.mismatches:
        print("SESSION FAIL: key streams differ")
        return 1
    if tap is not None and report.sent_bits:
        truth = np.concatenate(report.sent_bits)
        eav = channel.eavesdrop_decode(tap, config.params, truth=truth)
        analytic = security.attacker_error_analytic(config.params)
        print(f"tap: {len(tap.frames)} frames, attacker error "
              f"{eav.error_rate:.4f} (analytic {analytic:.4f}, "
              f"CI [{eav.ci_low:.4f}, {eav.ci_high:.4f}])")
        with open(out / "eavesdrop.csv", "w") as fh:
            fh.write("symbols,errors,error_rate,ci_low,ci_high,analytic\n")
            fh.write(f"{eav.guesses.size},{eav.errors},{eav.error_rate!r},"
                     f"{eav.ci_low!r},{eav.ci_high!r},{analytic!r}\n")
    print(f"keys written to {out}")
    return 0


def _session_split(args, out: Path) -> int:
    """One endpoint of a two-process session over TCP."""
    if not args.config:
        raise ParameterError("split sessions need --config (shared c0_hex)")
    config = _session_config(args)
    if args.listen:
        host, port = _host_port(args.listen)
        endpoint = channel.listen_endpoint(host, port)
        role = "A"
    else:
        host, port = _host_port(args.connect)
        endpoint = channel.connect_endpoint(host, port)
        role = "B"
    a, b = build_stations(config)
    station = a if role == "A" else b
    key = run_station(station, endpoint, config.rounds)
    endpoint.close()
    bits_to_file(key, out / f"key_{role.lower()}.bin")
    print(f"station {role}: {key.size} key bits -> "
          f"{out / f'key_{role.lower()}.bin'}")
    return 0


def _host_port(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise ParameterError(f"expected HOST:PORT, got {text!r}")
    return host, int(port)


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="noisekey",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    rng = sub.add_parser(
        "rng-test", help="bit-source statistics",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        description=(
            "Generate (or load) a bit stream and emit its run-length\n"
            "histograms, decay-law fits and Fourier flatness.\n\n"
            "CSV schemas:\n"
            "  run_lengths_{ones,zeros}.csv : k,count\n"
            "  fit_{ones,zeros}.csv         : parameter,value,stderr\n"
            "  spectrum.csv                 : bin,rel_amplitude\n\n"
            f"Exits nonzero if |epsilon| > {EPSILON_GATE} at "
            f"N >= {EPSILON_GATE_MIN_BITS} bits, if the fit is degenerate,\n"
            f"or if any spectrum bin exceeds {FLATNESS_GATE}x the mean."))
    rng.add_argument("--seed", type=int, default=1)
    rng.add_argument("--bits", type=int, default=1_277_874,
                     help="number of bits to generate")
    rng.add_argument("--mean-photons", type=float, default=100.0)
    rng.add_argument("--out", default="rng_report")
    rng.add_argument("--bits-in", help="analyze a packed bit file instead "
                                       "of generating (MSB-first bytes)")
    rng.add_argument("--bits-out", help="also write the stream, packed "
                                        "MSB-first")
    rng.add_argument("--hist-csv", help="fit an existing k,count histogram "
                                        "and skip generation")
    rng.add_argument("--no-plots", action="store_true")
    rng.set_defaults(func=cmd_rng_test)

    att = sub.add_parser(
        "attacker-sweep", help="attacker error over (M, <n>) grid",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        description=(
            "Analytic Bayes attacker error and a Monte-Carlo estimate per\n"
            "grid point, with leakage accounting.\n\n"
            "CSV schema:\n"
            "  attacker_sweep.csv : M,mean_photons,p_e_analytic,"
            "p_e_empirical,ci_low,ci_high,t,lambda,log10_i_lambda"))
    att.add_argument("--m-values", default="1,64,256,1024")
    att.add_argument("--photon-values", default="10,100,1000")
    att.add_argument("--trials", type=int, default=10 ** 6)
    att.add_argument("--s", type=int, default=10 ** 6,
                     help="round size used for the t column")
    att.add_argument("--lam", "--lambda", dest="lam", type=int, default=64)
    att.add_argument("--seed", type=int, default=1)
    att.add_argument("--out", default="attacker_report")
    att.add_argument("--no-plots", action="store_true")
    att.set_defaults(func=cmd_attacker_sweep)

    pa = sub.add_parser(
        "pa-sweep", help="post-amplification information surface",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        description=(
            "Exact residual-information bound 1/(ln2 * 2^lambda) over a\n"
            "grid of leak counts t and distilled sizes r, lambda = n-t-r.\n\n"
            "CSV schema:\n"
            "  pa_sweep.csv : n,t,r,lambda,log10_i_lambda,note\n"
            "Rows with r + t > n are kept with a skip note."))
    pa.add_argument("--n", type=int, default=9_000_000,
                    help="total pool+fresh bits per round")
    pa.add_argument("--t-values", default="0,50,100,150,200")
    pa.add_argument("--r-values", default="",
                    help="comma list; default spans n-400..n")
    pa.add_argument("--out", default="pa_report")
    pa.add_argument("--no-plots", action="store_true")
    pa.set_defaults(func=cmd_pa_sweep)

    ses = sub.add_parser(
        "session", help="run a key-distribution session",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        description=(
            "Run both stations in-process (memory or socket transport), or\n"
            "one endpoint of a two-process session with --listen/--connect.\n"
            "Writes both key streams and verifies they are identical.\n\n"
            "Config file: key=value lines with keys\n"
            "  M, adc_bits, vmax, mean_photons, sigma_v, s, lambda,\n"
            "  rounds, seed_a, seed_b, c0_hex\n\n"
            "CSV schemas:\n"
            "  session_report.csv : rounds,total_key_bits,mismatches,"
            "t,lambda,log10_i_lambda\n"
            "  eavesdrop.csv      : symbols,errors,error_rate,ci_low,"
            "ci_high,analytic"))
    ses.add_argument("--config", help="key=value session config file")
    ses.add_argument("--rounds", type=int, default=None)
    ses.add_argument("--seed", type=int, default=None,
                     help="station A seed (B uses seed+1 unless configured)")
    ses.add_argument("--out", default="session_out")
    ses.add_argument("--tap", action="store_true",
                     help="attach a passive wiretap and score the attacker")
    ses.add_argument("--transport", choices=("memory", "socket"),
                     default="memory")
    ses.add_argument("--listen", metavar="HOST:PORT",
                     help="run station A, waiting for B to connect")
    ses.add_argument("--connect", metavar="HOST:PORT",
                     help="run station B against a listening A")
    ses.set_defaults(func=cmd_session)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NoiseKeyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
