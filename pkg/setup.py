#!/usr/bin/env python3
"""
Convex Jets Setup - Interactive wizard for the solver defaults stored in
~/.convex_jets_config (sample counts, tolerances, envelope backend, threads,
logging).
"""

import importlib.util
import subprocess
import sys
from pathlib import Path
from typing import List

try:
    from simple_term_menu import TerminalMenu
    HAS_MENU = True
except ImportError:
    HAS_MENU = False

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent))

from src.config import Config


REQUIRED_PACKAGES = [
    # (import name, pip name)
    ("numpy", "numpy"),
    ("scipy", "scipy"),
    ("simple_term_menu", "simple-term-menu"),
    ("pytest", "pytest"),
    ("hypothesis", "hypothesis"),
]


def print_header(text: str):
    """Print a section header."""
    print()
    print("=" * 50)
    print(f"  {text}")
    print("=" * 50)
    print()


def print_step(step: int, total: int, text: str):
    """Print a step indicator."""
    print(f"[{step}/{total}] {text}")


def prompt(text: str, default: str = "") -> str:
    """Prompt user for input with optional default."""
    if default:
        result = input(f"{text} [{default}]: ").strip()
        return result if result else default
    return input(f"{text}: ").strip()


def prompt_int(text: str, default: int, low: int = 1) -> int:
    """Prompt for integer with default."""
    while True:
        result = prompt(text, str(default))
        try:
            value = int(result)
        except ValueError:
            print("Please enter a valid number.")
            continue
        if value < low:
            print(f"Please enter a number >= {low}.")
            continue
        return value


def prompt_float(text: str, default: float, positive: bool = True) -> float:
    """Prompt for a float with default."""
    while True:
        result = prompt(text, f"{default:g}")
        try:
            value = float(result)
        except ValueError:
            print("Please enter a valid number.")
            continue
        if positive and not value > 0:
            print("Please enter a positive number.")
            continue
        return value


def confirm(text: str, default: bool = True) -> bool:
    """Ask for confirmation."""
    suffix = " [Y/n]" if default else " [y/N]"
    result = input(f"{text}{suffix}: ").strip().lower()
    if not result:
        return default
    return result in ("y", "yes")


def choose(title: str, options: List[str], current: str) -> str:
    """Arrow-key menu when simple-term-menu is available, numbered prompt otherwise."""
    start = options.index(current) if current in options else 0
    if HAS_MENU:
        menu = TerminalMenu(options, title=f"  {title}", cursor_index=start)
        index = menu.show()
        return options[index] if index is not None else current
    print(title)
    for i, option in enumerate(options, 1):
        print(f"  {i}. {option}")
    while True:
        index = prompt_int("Choice", start + 1)
        if 1 <= index <= len(options):
            return options[index - 1]
        print(f"Please enter 1-{len(options)}.")


def _install_pip_package(pip_name: str) -> bool:
    """Install a Python package with the running interpreter's pip."""
    pip_cmd = [sys.executable, "-m", "pip"]
    print(f"  Trying: {' '.join(pip_cmd)} install {pip_name}")
    result = subprocess.run(pip_cmd + ["install", pip_name], capture_output=True)
    if result.returncode == 0:
        print(f"  {pip_name} installed successfully via pip!")
        return True
    print(f"  Failed to install {pip_name} via pip.")
    print(f"  You can try manually: {' '.join(pip_cmd)} install {pip_name}")
    return False


def check_prerequisites() -> bool:
    """Check and display prerequisites."""
    print_header("Prerequisites Check")

    missing = []
    for module, pip_name in REQUIRED_PACKAGES:
        ok = importlib.util.find_spec(module) is not None
        status = "[OK]" if ok else "[MISSING]"
        print(f"  {status} {pip_name}")
        if not ok:
            missing.append(pip_name)
    print()

    if not missing:
        print("All prerequisites satisfied!")
        print()
        return True

    print(f"Missing packages: {', '.join(missing)}")
    if confirm("Install missing packages automatically?", default=True):
        failed = [name for name in missing if not _install_pip_package(name)]
        if failed and not confirm("Continue anyway?", default=False):
            return False
    else:
        print()
        print("To install manually:")
        print(f"  {sys.executable} -m pip install -r requirements.txt")
        if not confirm("Continue anyway?", default=False):
            return False
    print()
    return True


def setup_sampling(config: Config) -> bool:
    """Configure verification sample counts."""
    print_header("Sampling")

    print("Verification sweeps sample the boundary with a fixed seed.")
    print("Larger counts take longer but tighten the measured constants.")
    print()

    samples = prompt_int("Boundary samples per property", config.samples)
    config.set("sampling", "samples", str(samples))

    ball_samples = prompt_int("Ball samples per rolling-ball check", config.ball_samples)
    config.set("sampling", "ball_samples", str(ball_samples))

    return True


def setup_tolerances(config: Config) -> bool:
    """Configure numerical tolerances."""
    print_header("Tolerances")

    print("Defaults match the documented acceptance thresholds.")
    print()
    if not confirm("Change tolerances?", default=False):
        return True

    for key, label, current in [
        ("feasibility", "Pairwise feasibility tolerance", config.feasibility_tol),
        ("exact", "Exact identity tolerance", config.exact_tol),
        ("finite_difference", "Finite-difference tolerance", config.finite_difference_tol),
        ("lipschitz", "Lipschitz bound slack", config.lipschitz_tol),
        ("convexity", "Convexity margin tolerance", config.convexity_tol),
    ]:
        value = prompt_float(label, current)
        config.set("tolerance", key, repr(value))

    return True


def setup_envelope(config: Config) -> bool:
    """Configure the convex-envelope backend."""
    print_header("Convex Envelope")

    print("direct - concave maximization per query (exact, any dimension up to 8)")
    print("grid   - biconjugate on a uniform grid (dimension <= 3, cached)")
    print()
    backend = choose("Envelope backend:", ["direct", "grid"], config.envelope_backend)
    config.set("envelope", "backend", backend)

    if backend == "grid" or confirm("Configure grid resolution?", default=False):
        resolution = prompt_int("Grid points per axis (1D/2D)", config.grid_resolution, low=3)
        config.set("envelope", "grid_resolution", str(resolution))
        resolution_3d = prompt_int("Grid points per axis (3D)", config.grid_resolution_3d, low=3)
        config.set("envelope", "grid_resolution_3d", str(resolution_3d))

    cross_check = confirm("Cross-check both backends after each build?", default=config.cross_check)
    config.set("envelope", "cross_check", "true" if cross_check else "false")
    if cross_check:
        points = prompt_int("Cross-check points", config.cross_check_points)
        config.set("envelope", "cross_check_points", str(points))

    margin = prompt_float("--auto margin (fraction of the sharp constant)", config.auto_margin)
    if not 0.0 < margin < 1.0:
        print("Margin must lie in (0, 1); keeping the previous value.")
        margin = config.auto_margin
    config.set("build", "auto_margin", repr(margin))

    return True


def setup_runtime(config: Config) -> bool:
    """Configure threads and logging."""
    print_header("Runtime & Logging")

    print(f"Threads can also be set per run with ${Config.THREADS_ENV}.")
    threads = prompt_int("Threads for sample sweeps", config.threads)
    config.set("runtime", "threads", str(threads))

    level = choose("Library log level:", ["WARNING", "INFO", "DEBUG"], config.log_level)
    config.set("logging", "level", level)

    current = str(config.run_log) if config.run_log else ""
    run_log = prompt("Run log file (empty for none)", current)
    config.set("logging", "run_log", run_log)

    return True


def smoke_test() -> bool:
    """Feasibility and construction on the unit circle."""
    print_header("Smoke Test")
    try:
        from src.body_c11 import build_c11
        from src.feasibility import max_c11_radius
        from src.fixtures import gen_sphere_data
    except ImportError as e:
        print(f"  [FAIL] import: {e}")
        return False

    problem = gen_sphere_data(16)
    r_max = max_c11_radius(problem)
    ok = abs(r_max - 1.0) <= 1e-12
    print(f"  {'[OK]' if ok else '[FAIL]'} unit circle r_max = {r_max:.15g}")
    body = build_c11(problem, 1.0)
    residual = max(abs(body.signed_distance(y)) for y in problem.points)
    ok_build = residual <= 1e-9
    print(f"  {'[OK]' if ok_build else '[FAIL]'} interpolation residual {residual:.3e}")
    return ok and ok_build


def main():
    """Main setup entry point."""
    print()
    print("=" * 50)
    print("     Convex Jets Setup")
    print("     Solver defaults for feasibility, construction")
    print("     and verification runs")
    print("=" * 50)
    print()

    config = Config()
    existed = config.load()
    if existed:
        print(f"Editing existing configuration at {config.config_path}")

    total = 5
    print_step(1, total, "Prerequisites")
    if not check_prerequisites():
        print("Setup cancelled.")
        sys.exit(1)

    print_step(2, total, "Sampling")
    setup_sampling(config)
    print_step(3, total, "Tolerances")
    setup_tolerances(config)
    print_step(4, total, "Envelope")
    setup_envelope(config)
    print_step(5, total, "Runtime")
    setup_runtime(config)

    config.save()
    print(f"Configuration saved to {config.config_path}")

    if confirm("Run the smoke test?", default=True):
        if not smoke_test():
            print("Smoke test failed. Check the installation.")

    print_header("Setup Complete!")

    print("Typical runs:")
    print("  python3 -m src.cli fixture sphere --param n_points=64 --out circle.json")
    print("  python3 -m src.cli feasibility circle.json --class c11")
    print("  python3 -m src.cli build circle.json --class c11 --radius 1 --out circle_body.json")
    print("  python3 -m src.cli verify circle_body.json --seed 7")
    print()
    print("Run the tests:")
    print("  python3 -m pytest tests")
    print()


if __name__ == "__main__":
    main()
