"""Command-line entry point: ``infoagg <experiment> --config <path> ...``."""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigError, NumericalError, ParameterError
from .experiments import EXPERIMENTS, build_spec, load_config, run_experiment

EPILOG = """\
experiments:
  baseline      no reports; price = theta - gamma*sigma_eta^2*K, simulated clearing
  report        one report; two-root fixed point, price precision, simulated market
  sweep         price precision for m = 0..m_max published reports
  recover       publisher recovers theta from own signal and price
  stability     iterate the fixed-point map from small loadings
  lln           error of the average of n published signals vs n
  chatbot       chatbot inverts queries, learns theta; answer-users stay less informed
  oracle-check  closed-form posterior vs dense Gaussian conditioning

config: a JSON object. Keys: sigma_eta sigma_x sigma_eps sigma_y gamma supply
  publishers theta n_agents n_reps seed lambda, plus per-experiment keys
  (sweep: m_max; stability: deltas damping max_iter; lln: sizes n_seeds;
  chatbot: query_map sigma_tau_answer n_trials; oracle-check: n_draws).
  theta may be a number or {"mean": .., "std": ..}. Unknown keys are errors.

outputs: <out>.csv, <out>.summary.txt and, with --svg, <out>.svg.
CSV columns:
  baseline      rep theta price_analytic price_root clearing_residual
  report        rep theta eps price_analytic price_root clearing_residual z_residual
  sweep         m b alpha_z alpha_hat stderr      (inf marks a fully revealing price)
  recover       rep theta theta_hat abs_error
  stability     delta expansion iterations limit abs_error
  lln           n rmse
  chatbot       trial theta_hat abs_error band_3sd within_band
  oracle-check  draw d_mean d_var d_alpha

exit codes: 0 all checks pass, 2 config error, 3 numerical/convergence error,
  4 a check failed, 5 I/O error.
"""


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="infoagg", description="Price informativeness experiments.",
        epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", required=True, help="JSON config file")
    ap.add_argument("--out", default=None, help="output prefix (default: ./<experiment>)")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--reps", type=int, default=None)
    ap.add_argument("--agents", type=int, default=None)
    ap.add_argument("--svg", action="store_true", help="also write an SVG chart")
    ap.add_argument("--workers", type=int, default=1,
                    help="processes for replications (results do not depend on it)")
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    out = args.out or args.experiment
    try:
        raw = load_config(args.config)
        spec = build_spec(args.experiment, raw, out, args.svg, args.seed, args.reps,
                          args.agents, args.workers)
        result = run_experiment(spec)
    except (ConfigError, ParameterError) as exc:
        print(f"infoagg: config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"infoagg: numerical error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"infoagg: I/O error: {exc}", file=sys.stderr)
        return 5
    for check in result.checks:
        print(check.line())
    print(f"wrote {result.csv_path} and {result.summary_path}"
          + (f" and {result.svg_path}" if result.svg_path else ""))
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
