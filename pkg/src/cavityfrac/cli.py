"""Command-line front end: generate | preprocess | train | scenarios | predict | verify."""

import argparse
import shutil
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .cavity_sim import CavityGeometry, SimConfig, generate_dataset
from .dataset import MANIFEST_NAME, load_dataset, save_dataset
from .errors import CavityFracError, ConfigError, ValidationError
from .mixture import MixtureSpec, bruggeman_eff, complement_fraction, mixing_residual
from .neuralnet import (Architecture, gradient_check, init_params, load_checkpoint,
                        model_forward, save_checkpoint)
from .preprocess import (SCENARIOS, FixturePair, apply_scenario, deembed, embed_fixture,
                         savgol_coefficients, SavGolParams, synth_fixture_pair)
from .rng import rng_from_seed
from .sparams import (N_POINTS, SParameterRecord, parse_touchstone, resample_uniform,
                      s_to_t, t_to_s, to_feature_tensor, write_touchstone)
from .training import TrainConfig, run_scenarios, train_model, write_reports

CONFIG_DEFAULTS = {
    "n_points": N_POINTS,
    "fmin_ghz": 0.01,
    "fmax_ghz": 20.0,
    "cavity_a": 0.040,
    "cavity_b": 0.020,
    "cavity_h": 0.040,
    "coupling": 0.8,
    "q_factor": 100.0,
    "noise_sigma": 0.0,
    "eps_host": 2.5,
    "eps_incl": 5.9,
    "fixture": False,
    "seed": 0,
    "epochs": 50,
    "k": 5,
    "lr": 1e-4,
    "beta1": 0.9,
    "beta2": 0.999,
    "adam_eps": 1e-8,
    "batch_size": 16,
    "allow_leakage": False,
    "n_intermediate": 4,
}

FIXTURE_DIR = "fixtures"
FIXTURE_SEED_OFFSET = 1_000_000


def _coerce(key, raw):
    default = CONFIG_DEFAULTS[key]
    if isinstance(default, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"bad boolean for '{key}': {raw}")
    if isinstance(default, int):
        return int(raw)
    return float(raw)


def load_config(path=None) -> dict:
    """Flat key=value config; unknown keys are rejected."""
    config = dict(CONFIG_DEFAULTS)
    if path is None:
        return config
    for line_no, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{line_no}: expected key=value, got '{line}'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_DEFAULTS:
            raise ConfigError(f"{path}:{line_no}: unknown configuration key '{key}'")
        config[key] = _coerce(key, value)
    return config


def write_resolved_config(config: dict, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = [f"{key}={config[key]}" for key in sorted(config)]
    (out / "runconfig.txt").write_text("\n".join(lines) + "\n")


def sim_config_from(config: dict) -> SimConfig:
    geometry = CavityGeometry(a=config["cavity_a"], b=config["cavity_b"],
                              h=config["cavity_h"])
    fixture = None
    if config["fixture"]:
        grid = np.linspace(config["fmin_ghz"] * 1e9, config["fmax_ghz"] * 1e9,
                           config["n_points"])
        fixture = synth_fixture_pair(grid, seed=config["seed"] + FIXTURE_SEED_OFFSET)
    return SimConfig(geometry=geometry, n_points=config["n_points"],
                     fmin=config["fmin_ghz"] * 1e9, fmax=config["fmax_ghz"] * 1e9,
                     coupling=config["coupling"], q_factor=config["q_factor"],
                     noise_sigma=config["noise_sigma"],
                     eps_host=complex(config["eps_host"]),
                     eps_incl=complex(config["eps_incl"]),
                     fixture=fixture, rng_seed=config["seed"])


def train_config_from(config: dict) -> TrainConfig:
    return TrainConfig(epochs=config["epochs"], k=config["k"], seed=config["seed"],
                       lr=config["lr"], beta1=config["beta1"], beta2=config["beta2"],
                       adam_eps=config["adam_eps"], batch_size=config["batch_size"],
                       allow_leakage=config["allow_leakage"],
                       arch=Architecture(input_len=config["n_points"]))


def parse_fractions(spec: str) -> list:
    """`linspace:<start>:<stop>:<count>` or `steps:<interval>`."""
    parts = spec.split(":")
    try:
        if parts[0] == "linspace" and len(parts) == 4:
            start, stop, count = float(parts[1]), float(parts[2]), int(parts[3])
            if count < 1:
                raise ConfigError(f"fraction count must be >= 1 in '{spec}'")
            values = np.linspace(start, stop, count)
        elif parts[0] == "steps" and len(parts) == 2:
            step = float(parts[1])
            if not 0 < step <= 1:
                raise ConfigError(f"step must be in (0, 1] in '{spec}'")
            values = np.arange(0.0, 1.0 + step / 2, step)
        else:
            raise ConfigError(f"bad fraction spec '{spec}'")
    except ValueError:
        raise ConfigError(f"bad fraction spec '{spec}'")
    if np.any((values < 0) | (values > 1)):
        raise ConfigError(f"fractions outside [0, 1] in '{spec}'")
    return [float(v) for v in values]


def _load_fixtures(path) -> FixturePair:
    root = Path(path)
    left = root / "left.s2p"
    right = root / "right.s2p"
    if not left.exists() or not right.exists():
        raise ConfigError(f"fixture files left.s2p/right.s2p not found in {root}")
    return FixturePair(left=parse_touchstone(left.read_text()),
                       right=parse_touchstone(right.read_text()))


def _save_fixtures(fx: FixturePair, out_dir) -> None:
    root = Path(out_dir) / FIXTURE_DIR
    root.mkdir(parents=True, exist_ok=True)
    (root / "left.s2p").write_text(write_touchstone(fx.left), newline="\n")
    (root / "right.s2p").write_text(write_touchstone(fx.right), newline="\n")


def cmd_generate(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config["seed"] = args.seed
    cfg = sim_config_from(config)
    fractions = parse_fractions(args.fractions)
    samples = generate_dataset(cfg, fractions)
    save_dataset(samples, args.out)
    if cfg.fixture is not None:
        _save_fixtures(cfg.fixture, args.out)
    write_resolved_config(config, args.out)
    print(f"wrote {len(samples)} samples to {args.out}")
    return 0


def cmd_preprocess(args) -> int:
    config = load_config(args.config)
    in_dir = Path(args.indir)
    out_dir = Path(args.out)
    if args.scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario '{args.scenario}'; choose from {SCENARIOS}")
    if args.scenario == "raw":
        out_dir.mkdir(parents=True, exist_ok=True)
        samples = load_dataset(in_dir)  # validates before copying
        for i in range(len(samples)):
            name = f"sample_{i:04d}.s2p"
            shutil.copyfile(in_dir / name, out_dir / name)
        shutil.copyfile(in_dir / MANIFEST_NAME, out_dir / MANIFEST_NAME)
    else:
        samples = load_dataset(in_dir)
        fixtures = None
        if args.scenario.startswith("deemb"):
            fixtures = _load_fixtures(args.fixtures or in_dir / FIXTURE_DIR)
        out = apply_scenario(samples, args.scenario,
                             fixtures=fixtures, n_intermediate=config["n_intermediate"])
        save_dataset(out, out_dir)
    fixture_dir = in_dir / FIXTURE_DIR
    if fixture_dir.exists():
        _save_fixtures(_load_fixtures(fixture_dir), out_dir)
    write_resolved_config(config, out_dir)
    print(f"scenario {args.scenario}: wrote {out_dir}")
    return 0


def _apply_train_overrides(config, args):
    if args.seed is not None:
        config["seed"] = args.seed
    if args.epochs is not None:
        config["epochs"] = args.epochs
    if args.k is not None:
        config["k"] = args.k
    if args.allow_leakage:
        config["allow_leakage"] = True


def cmd_train(args) -> int:
    config = load_config(args.config)
    _apply_train_overrides(config, args)
    samples = load_dataset(args.indir)
    cfg = train_config_from(config)
    report = train_model(samples, cfg, scenario=Path(args.indir).name)
    write_reports(args.out, [(report.scenario, report)])
    if report.best_fold is None:
        print("all folds failed", file=sys.stderr)
        return 1
    best = report.folds[report.best_fold]
    save_checkpoint(Path(args.out) / "model.npz", best.params, cfg.seed + best.fold)
    write_resolved_config(config, args.out)
    print(f"best fold {best.fold}: mse={best.mse:.6e} mae={best.mae:.6f} r2={best.r2:.6f}")
    return 0


def cmd_scenarios(args) -> int:
    config = load_config(args.config)
    _apply_train_overrides(config, args)
    in_dir = Path(args.indir)
    samples = load_dataset(in_dir)
    fixtures = _load_fixtures(args.fixtures or in_dir / FIXTURE_DIR)
    cfg = train_config_from(config)
    reports = run_scenarios(samples, fixtures, cfg)
    write_reports(args.out, reports)
    write_resolved_config(config, args.out)
    print(f"{'scenario':<16} {'mse':>12} {'mae':>10} {'r2':>10}")
    for name, report in reports:
        if report.best_fold is None:
            print(f"{name:<16} {'failed':>12}")
            continue
        best = report.folds[report.best_fold]
        print(f"{name:<16} {best.mse:>12.4e} {best.mae:>10.4f} {best.r2:>10.4f}")
    return 0


def cmd_predict(args) -> int:
    params, _ = load_checkpoint(args.checkpoint)
    record = parse_touchstone(Path(args.file).read_text())
    if len(record) != params.arch.input_len:
        record = resample_uniform(record, n=params.arch.input_len,
                                  fmin=record.frequencies[0], fmax=record.frequencies[-1])
    pred, _ = model_forward(to_feature_tensor(record, params.arch.input_len), params)
    print(f"fraction={pred:.6f} complement={complement_fraction(pred):.6f}")
    return 0


def run_verify(corrupt_gradient: bool = False) -> list:
    """Fast invariant suite; returns [(name, passed, detail), ...]."""
    checks = []

    rng = rng_from_seed(7)
    worst = 0.0
    for _ in range(200):
        spec = MixtureSpec(eps_host=complex(rng.uniform(1, 10)),
                           eps_incl=complex(rng.uniform(1, 10)),
                           fraction=float(rng.uniform(0, 1)))
        worst = max(worst, abs(mixing_residual(spec, bruggeman_eff(spec))))
    endpoint = abs(bruggeman_eff(MixtureSpec(2.5, 5.9, 0.0)) - 2.5)
    checks.append(("bruggeman_residual", worst < 1e-12 and endpoint < 1e-12,
                   f"max residual {worst:.2e}"))

    f = np.linspace(1e9, 2e9, 11)
    rec = SParameterRecord.from_components(
        f, *(rng.uniform(-1, 1, 11) + 1j * rng.uniform(-1, 1, 11) for _ in range(4)))
    back = parse_touchstone(write_touchstone(rec))
    checks.append(("touchstone_roundtrip", bool(np.allclose(back.s, rec.s, atol=1e-9)),
                   "parse(write(r)) == r"))

    m = rec.matrix_at(3)
    m2 = t_to_s(s_to_t(m))
    err = max(abs(m.s11 - m2.s11), abs(m.s12 - m2.s12),
              abs(m.s21 - m2.s21), abs(m.s22 - m2.s22))
    checks.append(("s_t_roundtrip", err < 1e-12, f"max err {err:.2e}"))

    fx = synth_fixture_pair(f, seed=11)
    rt = deembed(embed_fixture(rec, fx), fx)
    err = float(np.max(np.abs(rt.s - rec.s)))
    checks.append(("deembed_roundtrip", err < 1e-10, f"max err {err:.2e}"))

    kernel = savgol_coefficients(SavGolParams(5, 2))
    expected = np.array([-3, 12, 17, 12, -3]) / 35.0
    err = float(np.max(np.abs(kernel - expected)))
    checks.append(("savgol_kernel", err < 1e-12, f"max err {err:.2e}"))

    params = init_params(seed=3)
    x = to_feature_tensor(SParameterRecord.from_components(
        np.linspace(0.01e9, 20e9, N_POINTS),
        *(rng.uniform(-1, 1, N_POINTS) + 1j * rng.uniform(-1, 1, N_POINTS)
          for _ in range(4))))
    err = gradient_check(params, x, target=0.3, eps=1e-5, n_per_block=60, seed=5)
    if corrupt_gradient:
        err = max(err, 1.0)  # test hook: emulate a planted backprop bug
    checks.append(("gradient_check", err < 1e-4, f"max rel err {err:.2e}"))
    return checks


def cmd_verify(args) -> int:
    start = time.time()
    checks = run_verify()
    ok = True
    for name, passed, detail in checks:
        print(f"{'PASS' if passed else 'FAIL'}  {name:<22} {detail}")
        ok &= passed
    print(f"{'all checks passed' if ok else 'CHECKS FAILED'} ({time.time() - start:.1f} s)")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cavityfrac",
                                     description="Volume-fraction estimation from cavity "
                                                 "S-parameters with a from-scratch 1D CNN.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="synthesize a labeled .s2p dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--fractions", default="linspace:0:1:100")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("preprocess", help="apply one preprocessing scenario")
    p.add_argument("--in", dest="indir", required=True)
    p.add_argument("--scenario", required=True, choices=SCENARIOS)
    p.add_argument("--out", required=True)
    p.add_argument("--fixtures", help="directory holding left.s2p/right.s2p")
    p.add_argument("--config")
    p.set_defaults(func=cmd_preprocess)

    for name, fn, extra in (("train", cmd_train, False), ("scenarios", cmd_scenarios, True)):
        p = sub.add_parser(name, help=f"run {name} on a dataset directory")
        p.add_argument("--in", dest="indir", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--config")
        p.add_argument("--seed", type=int)
        p.add_argument("--epochs", type=int)
        p.add_argument("--k", type=int)
        p.add_argument("--allow-leakage", action="store_true")
        if extra:
            p.add_argument("--fixtures")
        p.set_defaults(func=fn)

    p = sub.add_parser("predict", help="predict the fraction for one .s2p file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--file", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("verify", help="run the fast invariant suite")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2
    except CavityFracError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
