"""Command-line front end: synth, train, sample, simulate, eval, doa.

Angles cross this boundary in degrees and are converted to radians at parse
time. Exit codes: 0 success, 1 runtime/IO failure, 2 usage or validation.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint
from .conditioning import Condition, init_encoder
from .config import parse_room_dims, resolve_config
from .dataset import build_dataset, default_classes, load_manifest, synth_mono
from .flow import SamplerConfig, sample
from .foa import FoaWaveform
from .geometry import Direction, fibonacci_grid
from .metrics import NoSignalError, doa_error, estimate_doa, eval_report
from .model import ModelConfig, init_params
from .room import ArraySpec, RoomSpec, simulate_baseline
from .stft import stft_preset, spec_to_waveform, waveform_to_spec
from .train import sigma_data_of, train_epochs
from .wavio import read_wav, write_wav


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--seed", type=int, default=None)


def _overrides(args: argparse.Namespace, keys: tuple[str, ...]) -> dict:
    return {k: getattr(args, k, None) for k in keys}


def cmd_synth(args: argparse.Namespace) -> int:
    if args.per_class < 1:
        raise ValueError("--per-class must be >= 1")
    classes = default_classes(args.classes)
    room = array = None
    if args.render == "simulated":
        room = RoomSpec(dimensions=parse_room_dims(args.room),
                        wall_absorption=args.absorption,
                        max_image_order=args.order)
        array = ArraySpec()
    manifest = build_dataset(classes, args.per_class, args.out,
                             directions=args.directions, render=args.render,
                             seed=args.seed if args.seed is not None else 0,
                             room=room, array=array)
    print(f"wrote {len(manifest.entries)} clips "
          f"({len(manifest.train)} train / {len(manifest.test)} test) to {manifest.root}")
    print(f"manifest: {manifest.root / 'manifest.txt'}")
    return 0


def _load_training_set(data_dir: Path, preset_name: str):
    manifest_path = data_dir / "manifest_train.txt"
    if not manifest_path.exists():
        manifest_path = data_dir / "manifest.txt"
    entries, header = load_manifest(manifest_path)  # missing file -> OSError
    if not entries:
        raise ValueError(f"no clips listed in {manifest_path}")
    vocab = header.get("classes", "").split(",") if header.get("classes") else []
    specs, conds = [], []
    stft_cfg = None
    clip_samples = 0
    for e in entries:
        ch, sr = read_wav(data_dir / e.filename)
        if stft_cfg is None:
            stft_cfg = stft_preset(preset_name, sample_rate=sr)
        clip_samples = max(clip_samples, ch.shape[1])
        spec = waveform_to_spec(FoaWaveform(ch, sr), stft_cfg)
        specs.append(spec.planes)
        conds.append(Condition(e.class_id, e.direction))
    if not vocab:
        vocab = [str(c) for c in sorted({e.class_id for e in entries})]
    return np.stack(specs), conds, vocab, stft_cfg, clip_samples


def _append_loss_outputs(ckpt_path: Path, history: list[tuple[int, float, int]]) -> None:
    from .plotting import plot_loss_curve

    csv_path = ckpt_path.parent / "loss.csv"
    lines = ["epoch,loss,step"]
    lines += [f"{e},{l:.8f},{s}" for e, l, s in history]
    csv_path.write_text("\n".join(lines) + "\n")
    plot_loss_curve([h[0] for h in history], [h[1] for h in history],
                    ckpt_path.parent / "loss.png")


def cmd_train(args: argparse.Namespace) -> int:
    cfg = resolve_config(args.config, _overrides(
        args, ("epochs", "lr", "batch_size", "p_drop", "seed", "stft_preset")))
    data_dir = Path(args.data)
    specs, conds, vocab, stft_cfg, clip_samples = _load_training_set(
        data_dir, cfg.stft_preset)
    mcfg = ModelConfig(planes=8, frames=stft_cfg.frames, bins=stft_cfg.bins,
                       patch_t=cfg.patch, patch_f=cfg.patch,
                       embed_dim=cfg.embed_dim, depth=cfg.depth, heads=cfg.heads,
                       cond_dim=cfg.cond_dim, time_dim=cfg.time_dim, seed=cfg.seed)

    ckpt_path = Path(args.ckpt)
    history: list[tuple[int, float, int]] = []
    if ckpt_path.exists():
        ck = load_checkpoint(ckpt_path)
        if (ck.model_config != mcfg or ck.stft_config != stft_cfg
                or ck.vocab != vocab):
            raise ValueError("resume from incompatible config: checkpoint was "
                             "trained with different model/STFT/class settings")
        params, enc, sigma, start_step = ck.model_params, ck.encoder, ck.sigma_data, ck.step
        csv_path = ckpt_path.parent / "loss.csv"
        if csv_path.exists():
            for line in csv_path.read_text().splitlines()[1:]:
                e, l, s = line.split(",")
                history.append((int(e), float(l), int(s)))
        print(f"resuming from {ckpt_path} at step {start_step}")
    else:
        params = init_params(mcfg)
        enc = init_encoder(len(vocab), cond_dim=cfg.cond_dim, seed=cfg.seed)
        sigma = sigma_data_of(specs)
        start_step = 0

    normalized = (specs / sigma).astype(np.float32)
    start_epoch = history[-1][0] + 1 if history else 0
    for epoch, loss, step in train_epochs(
            normalized, conds, params, mcfg, enc, epochs=cfg.epochs,
            batch_size=cfg.batch_size, lr=cfg.lr, p_drop=cfg.p_drop,
            seed=cfg.seed, start_step=start_step):
        g_epoch = start_epoch + epoch
        history.append((g_epoch, loss, step))
        save_checkpoint(ckpt_path, Checkpoint(mcfg, params, enc, stft_cfg,
                                              vocab, sigma, step, clip_samples))
        _append_loss_outputs(ckpt_path, history)
        print(f"epoch {g_epoch + 1} loss {loss:.6f} step {step}", flush=True)
    print(f"checkpoint: {ckpt_path}")
    print(f"loss curve: {ckpt_path.parent / 'loss.csv'}, {ckpt_path.parent / 'loss.png'}")
    return 0


def cmd_sample(args: argparse.Namespace) -> int:
    ck = load_checkpoint(args.ckpt)
    d = Direction.from_degrees(args.az, args.el)
    cond = Condition(args.class_id, d)
    scfg = SamplerConfig(steps=args.steps, cfg_scale=args.cfg,
                         integrator=args.integrator,
                         seed=args.seed if args.seed is not None else 0)
    spec = sample(ck.model_params, ck.model_config, ck.encoder, cond, scfg,
                  ck.sigma_data, ck.stft_config)
    wav = spec_to_waveform(spec, length=ck.clip_samples)
    write_wav(args.out, wav.channels, ck.stft_config.sample_rate)
    est = estimate_doa(wav, fibonacci_grid(args.grid_n))
    err = doa_error(est.direction, d)
    print(f"wrote {args.out}")
    print(f"self-check DoA: az {np.degrees(est.direction.azimuth):.1f} "
          f"el {np.degrees(est.direction.elevation):.1f} "
          f"(error {err:.1f} deg vs requested)"
          + (" [ambiguous]" if est.ambiguous else ""))
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    room = RoomSpec(dimensions=parse_room_dims(args.room),
                    wall_absorption=args.absorption,
                    max_image_order=args.order)
    seed = args.seed if args.seed is not None else 0
    if args.mono is not None:
        mono, sr = read_wav(args.mono)
        if mono.shape[0] != 1:
            raise ValueError(f"--mono expects a 1-channel file, got {mono.shape[0]}")
        mono = mono[0]
        room = RoomSpec(dimensions=room.dimensions,
                        wall_absorption=room.wall_absorption,
                        max_image_order=room.max_image_order, sample_rate=sr)
    else:
        mono = synth_mono(default_classes(args.class_id + 1)[args.class_id], seed)
    d = Direction.from_degrees(args.az, args.el)
    foa = simulate_baseline(mono, d, room, ArraySpec(), args.distance)
    write_wav(args.out, foa.channels, room.sample_rate)
    delay = args.distance / room.speed_of_sound * room.sample_rate
    est = estimate_doa(foa, fibonacci_grid(args.grid_n))
    print(f"wrote {args.out}")
    print(f"direct-path delay: {delay:.2f} samples")
    print(f"estimated DoA: az {np.degrees(est.direction.azimuth):.1f} "
          f"el {np.degrees(est.direction.elevation):.1f} "
          f"(error {doa_error(est.direction, d):.1f} deg vs requested)")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    from .plotting import plot_doa_histogram, plot_embedding_scatter

    for root, name in ((args.gen, args.gen_manifest), (args.ref, args.ref_manifest)):
        if not (Path(root) / name).exists():
            raise ValueError(f"missing condition sidecar {Path(root) / name}")
    report = eval_report(args.gen, args.ref, gen_manifest=args.gen_manifest,
                         ref_manifest=args.ref_manifest,
                         grid=fibonacci_grid(args.grid_n))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    report.write_csv(out)
    hist_png = out.with_name(out.stem + "_doa_hist.png")
    scatter_png = out.with_name(out.stem + "_embed.png")
    plot_doa_histogram(report.doa_errors, hist_png)
    plot_embedding_scatter(report.gen_embed, report.ref_embed, scatter_png)
    print(report.as_table())
    print(f"report: {out}")
    print(f"figures: {hist_png}, {scatter_png}")
    return 0


def cmd_doa(args: argparse.Namespace) -> int:
    ch, _ = read_wav(args.infile)
    est = estimate_doa(ch, fibonacci_grid(args.grid_n))
    az, el = np.degrees(est.direction.azimuth), np.degrees(est.direction.elevation)
    print(f"estimated DoA: az {az:.2f} el {el:.2f}"
          + (" [ambiguous]" if est.ambiguous else ""))
    if args.ref_az is not None and args.ref_el is not None:
        ref = Direction.from_degrees(args.ref_az, args.ref_el)
        print(f"angular error: {doa_error(est.direction, ref):.2f} deg")
    if args.map is not None:
        from .plotting import plot_power_map

        plot_power_map(est.power_map, fibonacci_grid(args.grid_n), args.map)
        print(f"power map: {args.map}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="foagen",
        description="Directional FOA audio generation, simulation, and evaluation.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a labeled synthetic FOA dataset")
    s.add_argument("--classes", type=int, default=3)
    s.add_argument("--per-class", type=int, required=True)
    s.add_argument("--render", choices=("analytic", "simulated"), default="analytic")
    s.add_argument("--directions", default="random",
                   help='"random" or "fibonacci:K"')
    s.add_argument("--out", required=True)
    s.add_argument("--room", default="30x20x10")
    s.add_argument("--absorption", type=float, default=0.5)
    s.add_argument("--order", type=int, default=6)
    _add_config_flags(s)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("train", help="train the velocity model on a dataset")
    s.add_argument("--data", required=True)
    s.add_argument("--ckpt", required=True)
    s.add_argument("--epochs", type=int, default=None)
    s.add_argument("--lr", type=float, default=None)
    s.add_argument("--batch-size", type=int, default=None, dest="batch_size")
    s.add_argument("--p-drop", type=float, default=None, dest="p_drop")
    s.add_argument("--stft-preset", default=None, dest="stft_preset")
    _add_config_flags(s)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("sample", help="draw one conditioned FOA clip")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--class", type=int, required=True, dest="class_id")
    s.add_argument("--az", type=float, required=True)
    s.add_argument("--el", type=float, required=True)
    s.add_argument("--steps", type=int, default=250)
    s.add_argument("--cfg", type=float, default=4.0)
    s.add_argument("--integrator", choices=("euler", "heun"), default="euler")
    s.add_argument("--grid-n", type=int, default=900, dest="grid_n")
    s.add_argument("--out", required=True)
    _add_config_flags(s)
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("simulate", help="room-simulated FOA baseline")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--mono", help="1-channel WAV source")
    src.add_argument("--class", type=int, dest="class_id",
                     help="synthesize this built-in class as the source")
    s.add_argument("--az", type=float, required=True)
    s.add_argument("--el", type=float, required=True)
    s.add_argument("--room", default="30x20x10")
    s.add_argument("--absorption", type=float, default=0.5)
    s.add_argument("--order", type=int, default=6)
    s.add_argument("--distance", type=float, default=1.0)
    s.add_argument("--grid-n", type=int, default=900, dest="grid_n")
    s.add_argument("--out", required=True)
    _add_config_flags(s)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("eval", help="score a generated set against a reference set")
    s.add_argument("--gen", required=True)
    s.add_argument("--ref", required=True)
    s.add_argument("--gen-manifest", default="manifest.txt", dest="gen_manifest")
    s.add_argument("--ref-manifest", default="manifest.txt", dest="ref_manifest")
    s.add_argument("--grid-n", type=int, default=900, dest="grid_n")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("doa", help="estimate direction of arrival of a FOA WAV")
    s.add_argument("--in", required=True, dest="infile")
    s.add_argument("--ref-az", type=float, default=None, dest="ref_az")
    s.add_argument("--ref-el", type=float, default=None, dest="ref_el")
    s.add_argument("--grid-n", type=int, default=900, dest="grid_n")
    s.add_argument("--map", default=None, help="write a power-map PNG here")
    s.set_defaults(func=cmd_doa)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (NoSignalError, CheckpointError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
