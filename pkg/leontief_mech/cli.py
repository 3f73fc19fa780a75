"""Command-line interface argument parsing for leontief-mech."""

import argparse

from leontief_mech import __version__
from leontief_mech.config import CONFIG_ENV_VAR, DISTRIBUTION_FAMILIES


def _common_options() -> argparse.ArgumentParser:
    """Options shared by every subcommand; flags override the config file."""
    common = argparse.ArgumentParser(add_help=False)
    group = common.add_argument_group("Run Options")
    group.add_argument(
        "-c",
        "--config",
        help=f"Path to a JSON run config (defaults to the {CONFIG_ENV_VAR} environment variable)",
    )
    group.add_argument("--out", dest="out_dir", help="Directory for CSV/JSON artifacts (default: lmech-out)")
    group.add_argument("--grid", dest="verify_grid", type=int, help="Side length of the verification mesh (default: 50)")
    group.add_argument("--kfloor", dest="k_floor", type=float, help="Smallest ratio k used in place of 0 (default: 1e-3)")
    group.add_argument("--tol", type=float, help="Tolerance for IC, IR and characterization checks (default: 1e-9)")
    group.add_argument("--seed", type=int, help="Seed for randomized self-tests (default: 0)")
    group.add_argument("--family", choices=DISTRIBUTION_FAMILIES[:3], help="Use a built-in distribution family")
    group.add_argument("--verbose", action="store_true", help="Log progress to stderr")
    return common


def create_parser() -> argparse.ArgumentParser:
    """Create and configure the argument parser."""
    parser = argparse.ArgumentParser(
        prog="lmech",
        description="Compute, verify and certify revenue-optimal mechanisms for two complementary divisible goods",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s -v                                   # Show version
  %(prog)s conditions --family Example2         # Condition A / B / B' verdicts
  %(prog)s solve --family Example1 --out run1   # Optimal mechanism + psi curve CSV
  %(prog)s verify run1/mechanism.json --grid 30 # Direct IC and characterization checks
  %(prog)s verify --random 200 --seed 7         # Seeded equivalence self-test
  %(prog)s certify -c run.json                  # Pointwise bound + threshold oracle

Exit Codes:
  0  all checks passed
  1  a verdict failed, or the library rejected the input
  2  usage or configuration error
        """,
    )
    parser.add_argument(
        "-v",
        "--version",
        action="version",
        version=f"%(prog)s {__version__}",
    )

    common = _common_options()
    commands = parser.add_subparsers(dest="command", metavar="command", required=True)
    commands.add_parser("validate", parents=[common], help="Check positivity, normalization and marginals")
    commands.add_parser("conditions", parents=[common], help="Classify the distribution against A, B and B'")
    commands.add_parser("solve", parents=[common], help="Build the optimal mechanism for the distribution")

    verify = commands.add_parser("verify", parents=[common], help="Run the direct and characterization IC checks")
    verify.add_argument("mechanism", nargs="?", help="Mechanism JSON file written by 'solve' (or edited by hand)")
    verify.add_argument(
        "--random",
        type=int,
        nargs="?",
        const=0,
        metavar="N",
        help="Instead of a file, test N seeded valid and N perturbed mechanisms (default N from config)",
    )

    revenue = commands.add_parser("revenue", parents=[common], help="Expected revenue and virtual surplus")
    revenue.add_argument("mechanism", nargs="?", help="Mechanism JSON file (defaults to the solved optimum)")

    certify = commands.add_parser("certify", parents=[common], help="Compare the optimum with the bound and the oracle")
    certify.add_argument("--oracle-k", dest="oracle_k_nodes", type=int, help="Ratio cells in the oracle search (default: 5)")
    certify.add_argument(
        "--oracle-rho", dest="oracle_rho_nodes", type=int, help="Threshold levels in the oracle (default: 31)"
    )

    commands.add_parser("sweep", parents=[common], help="Write the zero curve and price curve to CSV")
    return parser
