"""Batch front-end.

Subcommands:

* simulate — run one full session, write the transcript JSON.
  Exit 0 when a key is produced, 2 on protocol abort (a domain outcome,
  not an error), 1 on configuration or runtime errors.
* sweep    — grid over device noise and/or tolerated eta; one CSV row
  per point: noise, eta, abort_rate, mean_key_len, per_bit_guess_rate.
* rates    — tabulate the key-rate calculator over an eta grid.
* attack   — run the adversary battery, one CSV row per configuration.
* extract  — apply a seeded extractor to a raw-bit file.

Every command honors --seed for bit-exact reproducibility. Values may
also come from an INI config file (sections [run], [device], [eve],
[rate_model]); command-line flags override file values. The report
commands render a matplotlib figure next to the CSV unless --no-plot
is given.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import analysis, bits, devices, extract, eve as eve_mod, protocol

SWEEP_COLUMNS = ["noise", "eta", "abort_rate", "mean_key_len", "per_bit_guess_rate"]
RATES_COLUMNS = ["eta", "kappa_bound", "final_len_per_m", "recon_cost", "o_term_constant", "basis"]
ATTACK_COLUMNS = ["name", "abort_rate", "mean_key_len", "per_bit_guess_rate", "decode_accuracy"]


@dataclass
class RunConfig:
    command: str = ""
    m: int = 20000
    eps: float = 1e-6
    eta: float = 0.005
    c_gamma: float = protocol.DEFAULT_C_GAMMA
    gamma: Optional[float] = None
    noise: float = 0.0
    device: str = "honest"
    eve: str = "none"
    trials: int = 20
    seed: Optional[int] = None
    pa: str = "toeplitz"
    recon_cost: str = "empirical"
    o_term_constant: float = 2.0
    basis: str = "C_minus_B"
    out: Optional[str] = None
    plot: bool = True
    workers: int = 1
    extras: dict = field(default_factory=dict)


def _load_config_file(path: str) -> dict:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ValueError(f"config file not found: {path}")
    values: dict = {}
    for section in ("run", "rate_model"):
        if parser.has_section(section):
            values.update(dict(parser.items(section)))
    if parser.has_section("device"):
        dev = dict(parser.items("device"))
        name = dev.pop("name", "honest")
        if dev:
            name += ":" + ",".join(f"{k}={v}" for k, v in sorted(dev.items()))
        values["device"] = name
    if parser.has_section("eve"):
        values["eve"] = parser.get("eve", "name", fallback="none")
    return values


def _build_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(command=args.command)
    file_values = _load_config_file(args.config) if getattr(args, "config", None) else {}
    casts = {
        "m": int, "trials": int, "seed": int, "workers": int,
        "eps": float, "eta": float, "c_gamma": float, "gamma": float,
        "noise": float, "o_term_constant": float,
    }
    for key, value in file_values.items():
        if hasattr(cfg, key):
            setattr(cfg, key, casts.get(key, str)(value))
    for key in vars(cfg):
        arg = getattr(args, key, None)
        if arg is not None:
            setattr(cfg, key, arg)
    if getattr(args, "no_plot", False):
        cfg.plot = False
    return cfg


def _parse_spec_params(spec: str) -> tuple[str, dict]:
    if ":" not in spec:
        return spec, {}
    name, _, rest = spec.partition(":")
    params = {}
    for item in rest.split(","):
        if item:
            k, _, v = item.partition("=")
            params[k.strip()] = v.strip()
    return name, params


def build_device_factory(cfg: RunConfig):
    """Device factory from the config's device spec; returns
    (factory, metadata) where metadata carries covert-channel context."""
    name, params = _parse_spec_params(cfg.device)
    meta: dict = {"name": name}
    if name == "honest":
        noise = float(params.get("noise", cfg.noise))
        meta["noise"] = noise
        return (lambda rng: devices.honest_pair(noise, rng)), meta
    if name == "deterministic":
        if "fa" in params or "fb" in params:
            fa = tuple(int(c) for c in params.get("fa", "000"))
            fb = tuple(int(c) for c in params.get("fb", "00"))
        else:
            fa, fb = analysis.best_deterministic_strategy()
        meta.update(fa=fa, fb=fb)
        return (lambda rng: devices.deterministic_pair(fa, fb)), meta
    if name == "memory":
        kind = params.get("kind", "tape_sync")
        if kind != "tape_sync":
            raise ValueError(f"unknown memory strategy {kind!r}")
        tape = bytes.fromhex(params["tape"]) if "tape" in params else b"\x35" * 16
        meta["tape"] = tape
        return (lambda rng: devices.tape_sync_pair(tape)), meta
    if name == "covert":
        flip_rate = float(params.get("flip_rate", 0.05))
        secret_bits = int(params.get("secret_bits", 24))
        tape = bytes.fromhex(params["tape"]) if "tape" in params else b"\x51" * 16
        secret_rng = np.random.default_rng([hash(tape) & 0xFFFF, secret_bits])
        secret = secret_rng.integers(0, 2, secret_bits).tolist()
        meta.update(flip_rate=flip_rate, secret=secret, tape=tape, secret_bits=secret_bits)
        return (lambda rng: devices.covert_channel_pair(secret, flip_rate, rng, tape=tape)), meta
    raise ValueError(f"unknown device {name!r}")


def build_eve(cfg: RunConfig, device_meta: dict):
    name, _ = _parse_spec_params(cfg.eve)
    if name in ("", "none"):
        return None
    if name == "transcript":
        return eve_mod.transcript_eve()
    if name == "covert":
        if device_meta.get("name") != "covert":
            raise ValueError("covert eve requires a covert device")
        return eve_mod.covert_decoder_eve(
            device_meta["tape"], device_meta["flip_rate"], device_meta["secret_bits"]
        )
    raise ValueError(f"unknown eve {name!r}")


def build_params(cfg: RunConfig) -> protocol.ProtocolParams:
    model = analysis.RateModel(
        recon_cost=cfg.recon_cost, o_term_constant=cfg.o_term_constant, basis=cfg.basis
    )
    return protocol.ProtocolParams(
        m=cfg.m, eps=cfg.eps, eta=cfg.eta, c_gamma=cfg.c_gamma,
        gamma=cfg.gamma, rate_model=model, pa_backend=cfg.pa,
    )


def _master_rng(cfg: RunConfig, salt: int = 0) -> np.random.Generator:
    if cfg.seed is None:
        raise ValueError("--seed is required for reproducible runs")
    return np.random.default_rng([cfg.seed, salt])


def _write_csv(path: str, columns: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


# ---------------------------------------------------------------------------
# Commands.

def cmd_simulate(cfg: RunConfig) -> int:
    params = build_params(cfg)
    factory, meta = build_device_factory(cfg)
    eve = build_eve(cfg, meta)
    master = _master_rng(cfg)
    dev_rng, proto_rng = master.spawn(2)
    if eve is not None:
        eve.session_start()
    result = protocol.run_session(factory(dev_rng), eve, params, proto_rng)
    text = protocol.serialize_session(result)
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        print(text)
    status = f"abort reason={result.abort_reason}" if result.aborted else \
        f"key_len={result.alice_key.size}"
    print(f"simulate: m={cfg.m} device={cfg.device} eta'={result.eta_observed:.6f} {status}",
          file=sys.stderr)
    return 2 if result.aborted else 0


def _sweep_point(point: tuple) -> dict:
    cfg_dict, noise, eta, index = point
    cfg = RunConfig(**cfg_dict)
    cfg.noise, cfg.eta = noise, eta
    cfg.device = "honest"
    params = build_params(cfg)
    eve = eve_mod.transcript_eve()
    report = eve_mod.evaluate_security(
        lambda rng: devices.honest_pair(noise, rng), eve, params,
        cfg.trials, _master_rng(cfg, salt=index + 1),
    )
    return {
        "noise": noise,
        "eta": eta,
        "abort_rate": report.abort_rate,
        "mean_key_len": report.mean_key_len,
        "per_bit_guess_rate": "" if report.per_bit_guess_rate is None else report.per_bit_guess_rate,
    }


def cmd_sweep(cfg: RunConfig) -> int:
    noise_grid = cfg.extras.get("noise_grid") or [cfg.noise]
    eta_grid = cfg.extras.get("eta_grid") or [cfg.eta]
    points = [(noise, eta) for noise in noise_grid for eta in eta_grid]
    if not points:
        raise ValueError("empty sweep grid")
    cfg_dict = {k: v for k, v in vars(cfg).items() if k != "extras"}
    jobs = [(cfg_dict, noise, eta, i) for i, (noise, eta) in enumerate(points)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    else:
        rows = [_sweep_point(job) for job in jobs]
    out = cfg.out or "sweep.csv"
    _write_csv(out, SWEEP_COLUMNS, rows)
    if cfg.plot:
        from . import plotting
        plotting.render_sweep_csv(out)
    print(f"sweep: {len(rows)} points -> {out}", file=sys.stderr)
    return 0


def cmd_rates(cfg: RunConfig) -> int:
    eta_grid = cfg.extras.get("eta_grid")
    if eta_grid is None:
        eta_grid = np.linspace(0.0, 0.03, 61).tolist()
    if not eta_grid:
        raise ValueError("empty eta grid")
    model = analysis.RateModel(
        recon_cost=cfg.recon_cost, o_term_constant=cfg.o_term_constant, basis=cfg.basis
    )
    if model.recon_cost == "empirical":
        model = analysis.RateModel(recon_cost="h2eta", o_term_constant=cfg.o_term_constant,
                                   basis=cfg.basis)
    rows = []
    for eta in eta_grid:
        kb, rate = analysis.key_rate(eta, cfg.eps, cfg.m, model, gamma=cfg.gamma or 0.0)
        rows.append({
            "eta": eta, "kappa_bound": kb, "final_len_per_m": rate,
            "recon_cost": model.recon_cost, "o_term_constant": model.o_term_constant,
            "basis": model.basis,
        })
    out = cfg.out or "rates.csv"
    _write_csv(out, RATES_COLUMNS, rows)
    if cfg.plot:
        from . import plotting
        plotting.render_rates_csv(out)
    print(f"rates: {len(rows)} rows -> {out}", file=sys.stderr)
    return 0


def cmd_attack(cfg: RunConfig) -> int:
    battery = [
        ("deterministic_best", "deterministic", "transcript"),
        ("memory_tape_sync", "memory:kind=tape_sync", "transcript"),
        ("covert_flip_0.05", "covert:flip_rate=0.05", "covert"),
        ("covert_flip_0.002", "covert:flip_rate=0.002", "covert"),
    ]
    rows = []
    for index, (name, device_spec, eve_spec) in enumerate(battery):
        sub = RunConfig(**{k: v for k, v in vars(cfg).items() if k != "extras"})
        sub.device, sub.eve = device_spec, eve_spec
        factory, meta = build_device_factory(sub)
        eve = build_eve(sub, meta)
        params = build_params(sub)
        master = _master_rng(sub, salt=index + 101)
        decode_hits = decode_total = 0
        aborts = 0
        key_lens = []
        bit_hits = bit_total = 0
        for child in master.spawn(sub.trials):
            dev_rng, proto_rng = child.spawn(2)
            if eve is not None:
                eve.session_start()
            result = protocol.run_session(factory(dev_rng), eve, params, proto_rng)
            if isinstance(eve, eve_mod.CovertDecoderEve):
                decoded = eve.decode_secret()
                decode_hits += int((decoded == np.asarray(meta["secret"])).sum())
                decode_total += len(meta["secret"])
            if result.aborted:
                aborts += 1
                continue
            key_lens.append(result.alice_key.size)
            raw = result.raw_positions
            if eve is not None and raw.size:
                guess = eve.guess_raw_key(raw)
                bit_hits += int((guess == result.b[raw]).sum())
                bit_total += raw.size
        rows.append({
            "name": name,
            "abort_rate": aborts / sub.trials,
            "mean_key_len": float(np.mean(key_lens)) if key_lens else 0.0,
            "per_bit_guess_rate": bit_hits / bit_total if bit_total else "",
            "decode_accuracy": decode_hits / decode_total if decode_total else "",
        })
    out = cfg.out or "attack.csv"
    _write_csv(out, ATTACK_COLUMNS, rows)
    if cfg.plot:
        from . import plotting
        plotting.render_attack_csv(out)
    print(f"attack: {len(rows)} configurations -> {out}", file=sys.stderr)
    return 0


def cmd_extract(cfg: RunConfig) -> int:
    ex = cfg.extras
    data = Path(ex["infile"]).read_bytes()
    n_bits = ex.get("n_bits") or 8 * len(data)
    x = bits.unpack_bits(data, n_bits)
    if cfg.pa == "toeplitz":
        out_len = ex["out_len"]
        if out_len is None:
            raise ValueError("--out-len is required for toeplitz extraction")
        seed_len = n_bits + out_len - 1
        if ex.get("seed_hex"):
            seed = bits.hex_to_bits(ex["seed_hex"], seed_len)
        else:
            seed = bits.random_bits(_master_rng(cfg), seed_len)
        out_bits = extract.toeplitz_hash(x, seed, out_len)
    else:
        if ex.get("spec_json"):
            spec = extract.ExtractorSpec.from_json(Path(ex["spec_json"]).read_text())
        else:
            out_len = ex["out_len"]
            if out_len is None:
                raise ValueError("--out-len or --spec-json is required for trevisan")
            spec = extract.build_extractor_spec(n_bits, out_len, _master_rng(cfg, salt=1))
        if ex.get("seed_hex"):
            seed = bits.hex_to_bits(ex["seed_hex"], spec.d)
        else:
            seed = bits.random_bits(_master_rng(cfg), spec.d)
        out_bits = extract.trevisan_extract(x, seed, spec)
    out = cfg.out or "extracted.bin"
    Path(out).write_bytes(bits.pack_bits(out_bits))
    print(f"extract: {n_bits} bits -> {out_bits.size} bits ({cfg.pa}) -> {out}", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# Argument parsing.

def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip() != ""]


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI config file; flags override its values")
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--c-gamma", dest="c_gamma", type=float, default=None)
    p.add_argument("--gamma", type=float, default=None,
                   help="Bell-round fraction; overrides the derived value")
    p.add_argument("--noise", type=float, default=None)
    p.add_argument("--device", default=None, help="name[:k=v,...]")
    p.add_argument("--eve", default=None, help="none | transcript | covert")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--pa", choices=("toeplitz", "trevisan"), default=None)
    p.add_argument("--recon-cost", dest="recon_cost",
                   choices=analysis.RECON_COST_CHOICES, default=None)
    p.add_argument("--o-term", dest="o_term_constant", type=float, default=None)
    p.add_argument("--basis", choices=analysis.BASIS_CHOICES, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--no-plot", action="store_true", help="skip figure rendering")
    p.add_argument("--workers", type=int, default=None)


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="diqkdlab", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    for name in ("simulate", "sweep", "rates", "attack"):
        p = sub.add_parser(name)
        _add_common(p)
        if name == "sweep":
            p.add_argument("--noise-grid", type=_float_list, default=None)
            p.add_argument("--eta-grid", type=_float_list, default=None)
        if name == "rates":
            p.add_argument("--eta-grid", type=_float_list, default=None)

    p = sub.add_parser("extract")
    _add_common(p)
    p.add_argument("--in", dest="infile", required=True, help="raw-bit input file")
    p.add_argument("--n-bits", type=int, default=None)
    p.add_argument("--out-len", type=int, default=None)
    p.add_argument("--seed-hex", default=None, help="extractor seed as a hex string")
    p.add_argument("--spec-json", default=None, help="extractor spec JSON (trevisan)")
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _build_config(args)
        if args.command == "sweep":
            cfg.extras["noise_grid"] = args.noise_grid
            cfg.extras["eta_grid"] = args.eta_grid
            if (args.noise_grid is not None and not args.noise_grid) or (
                args.eta_grid is not None and not args.eta_grid
            ):
                raise ValueError("empty sweep grid")
        if args.command == "rates":
            cfg.extras["eta_grid"] = args.eta_grid
        if args.command == "extract":
            cfg.extras.update(
                infile=args.infile, n_bits=args.n_bits, out_len=args.out_len,
                seed_hex=args.seed_hex, spec_json=args.spec_json,
            )
        handler = {
            "simulate": cmd_simulate,
            "sweep": cmd_sweep,
            "rates": cmd_rates,
            "attack": cmd_attack,
            "extract": cmd_extract,
        }[args.command]
        return handler(cfg)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
