"""Adversarial training loop: alternating critic and generator Adam updates,
step learning-rate schedule, deterministic per-epoch example streams, metric
logging, and checksummed checkpoints.
"""

import hashlib
import io
import json
import logging
import os
import struct
from dataclasses import asdict, dataclass, field

import numpy as np
import torch

from .blocks import derive_seed, init_parameters, make_edge_detector, to_nchw
from .critics import make_critic_pair
from .data import MaskingPolicy, make_eval_example, make_example
from .generator import Generator, get_scale
from .losses import (
    LossWeights,
    build_loss_mask,
    critic_loss,
    generator_adv_loss,
    gradient_penalty,
    masked_l1,
    sketch_alignment_loss,
    total_generator_loss,
)

log = logging.getLogger(__name__)

ADAM_BETAS = (0.5, 0.9)
CHECKPOINT_MAGIC = b"OSKCKPT1"
CHECKPOINT_VERSION = 1
METRIC_KEYS = ("l1", "ls", "lg_global", "lg_local",
               "ld_global", "ld_local", "gp_global", "gp_local")
# run-length knobs excluded from the config fingerprint so longer runs can
# resume shorter ones
FINGERPRINT_EXCLUDED = ("epochs", "checkpoint_every")


class CheckpointError(Exception):
    """Unreadable, corrupted, or incompatible checkpoint."""


class TrainingDiverged(RuntimeError):
    """A loss term became non-finite; the message names the term."""


@dataclass
class TrainConfig:
    scale: str = "full"
    batch_size: int = 30
    lr0: float = 1e-4
    lr_decay_epoch: int = 200
    lr_decay_factor: float = 0.1
    epochs: int = 800
    weights: LossWeights = field(default_factory=LossWeights)
    critic_steps_per_gen_step: int = 1
    seed: int = 0
    mask_floor: float = 0.2
    checkpoint_every: int = 50
    augment: bool = True

    def __post_init__(self):
        get_scale(self.scale)
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be positive, got {self.batch_size}")
        if self.lr0 <= 0 or self.lr_decay_factor <= 0:
            raise ValueError("learning rates and decay factor must be positive")
        if self.epochs < 1:
            raise ValueError(f"epochs must be at least 1, got {self.epochs}")
        if self.critic_steps_per_gen_step < 0:
            raise ValueError("critic_steps_per_gen_step must be nonnegative")
        if not 0.0 < self.mask_floor <= 1.0:
            raise ValueError(f"mask_floor must lie in (0, 1], got {self.mask_floor}")
        if self.checkpoint_every < 1:
            raise ValueError("checkpoint_every must be positive")

    def to_flat_dict(self):
        d = asdict(self)
        d.update(d.pop("weights"))
        return d

    @classmethod
    def from_flat_dict(cls, d):
        d = dict(d)
        weight_names = ("lambda_r", "lambda_a", "lambda_s", "alpha", "lambda_w")
        weights = LossWeights(**{k: d.pop(k) for k in weight_names if k in d})
        return cls(weights=weights, **d)

    def to_file(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_flat_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_file(cls, path):
        with open(path) as fh:
            return cls.from_flat_dict(json.load(fh))


def desk_config(**overrides):
    """Desk-scale defaults: small batch, short schedule, same loss weights."""
    base = dict(scale="desk", batch_size=8, epochs=50, lr_decay_epoch=200,
                checkpoint_every=25)
    base.update(overrides)
    return TrainConfig(**base)


def lr_at(epoch, cfg):
    """Step schedule: lr0 before the decay epoch, lr0 * factor from it on."""
    if epoch < 0:
        raise ValueError(f"epoch must be nonnegative, got {epoch}")
    if epoch < cfg.lr_decay_epoch:
        return cfg.lr0
    return cfg.lr0 * cfg.lr_decay_factor


def config_fingerprint(cfg):
    """Stable digest of every config field that shapes the computation."""
    d = cfg.to_flat_dict()
    for key in FINGERPRINT_EXCLUDED:
        d.pop(key, None)
    blob = json.dumps(d, sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


def build_models(cfg):
    """Freshly initialized generator, critic pair and frozen edge detector."""
    scale = get_scale(cfg.scale)
    generator = Generator(scale)
    init_parameters(generator, derive_seed(cfg.seed, "init", "generator"))
    global_critic, local_critic = make_critic_pair(scale)
    init_parameters(global_critic, derive_seed(cfg.seed, "init", "global_critic"))
    init_parameters(local_critic, derive_seed(cfg.seed, "init", "local_critic"))
    return {
        "generator": generator,
        "global_critic": global_critic,
        "local_critic": local_critic,
        "detector": make_edge_detector(),
    }


def build_optimizers(models, lr):
    opt_g = torch.optim.Adam(models["generator"].parameters(), lr=lr, betas=ADAM_BETAS)
    critic_params = list(models["global_critic"].parameters())
    critic_params += list(models["local_critic"].parameters())
    opt_d = torch.optim.Adam(critic_params, lr=lr, betas=ADAM_BETAS)
    return {"generator": opt_g, "critics": opt_d}


def collate(examples):
    """Stack numpy training examples into NCHW float32 tensors."""
    def stack(field_name):
        return torch.cat([to_nchw(getattr(e, field_name)) for e in examples], dim=0)

    return {name: stack(name) for name in
            ("image_left", "image_right", "sketch_left", "sketch_right",
             "full_image", "full_sketch")}


def _check_finite(name, value):
    if not torch.isfinite(value).all():
        raise TrainingDiverged(f"non-finite loss term {name}: {value}")
    return value


def _record(metrics, name, value):
    metrics[name] = float(_check_finite(name, value).detach())


def train_step(models, optimizers, batch, cfg, mask, eps_gen=None):
    """One critic phase (possibly several updates) then one generator update.

    Returns a metrics dict with every loss component; terms not computed in
    degenerate configs are reported as 0.0.
    """
    gen = models["generator"]
    d_global = models["global_critic"]
    d_local = models["local_critic"]
    detector = models["detector"]
    w = cfg.weights

    real_full = batch["full_image"]
    full_sketch = batch["full_sketch"]
    sketch_right = batch["sketch_right"]
    real_right = batch["image_right"]
    half_w = real_right.shape[-1]

    metrics = {k: 0.0 for k in METRIC_KEYS}

    for _ in range(cfg.critic_steps_per_gen_step):
        with torch.no_grad():
            fake_full = gen(batch["image_left"], batch["sketch_left"], sketch_right)
        fake_full = fake_full.detach()
        fake_right = fake_full[..., half_w:]

        dg_real = d_global(real_full, full_sketch)
        dg_fake = d_global(fake_full, full_sketch)
        gp_g = gradient_penalty(d_global, real_full, fake_full, full_sketch,
                                lambda_w=w.lambda_w, generator=eps_gen)
        ld_g = critic_loss(dg_real, dg_fake, gp_g)

        dl_real = d_local(real_right, sketch_right)
        dl_fake = d_local(fake_right, sketch_right)
        gp_l = gradient_penalty(d_local, real_right, fake_right, sketch_right,
                                lambda_w=w.lambda_w, generator=eps_gen)
        ld_l = critic_loss(dl_real, dl_fake, gp_l)

        for name, value in (("ld_global", ld_g), ("ld_local", ld_l),
                            ("gp_global", gp_g), ("gp_local", gp_l)):
            _record(metrics, name, value)

        optimizers["critics"].zero_grad()
        (ld_g + ld_l).backward()
        optimizers["critics"].step()

    fake_full = gen(batch["image_left"], batch["sketch_left"], sketch_right)
    l1 = masked_l1(fake_full, real_full, mask)
    ls = sketch_alignment_loss(fake_full, full_sketch, detector)
    _record(metrics, "l1", l1)
    _record(metrics, "ls", ls)

    if w.lambda_a > 0:
        fake_right = fake_full[..., half_w:]
        dg_fake = d_global(fake_full, full_sketch)
        dl_fake = d_local(fake_right, sketch_right)
        lg = generator_adv_loss(dg_fake, dl_fake, alpha=w.alpha)
        _record(metrics, "lg_global", -dg_fake.mean())
        _record(metrics, "lg_local", -dl_fake.mean())
    else:
        lg = torch.zeros((), dtype=fake_full.dtype)

    total = _check_finite("total", total_generator_loss(l1, ls, lg, w))
    optimizers["generator"].zero_grad()
    total.backward()
    optimizers["generator"].step()
    return metrics


def _set_lr(optimizers, lr):
    for opt in optimizers.values():
        for group in opt.param_groups:
            group["lr"] = lr


def save_checkpoint(models, optimizers, epoch, global_step, cfg, path):
    """Write a checksummed checkpoint; `epoch` counts completed epochs."""
    payload = {
        "fingerprint": config_fingerprint(cfg),
        "config": cfg.to_flat_dict(),
        "epoch": epoch,
        "global_step": global_step,
        "generator": models["generator"].state_dict(),
        "global_critic": models["global_critic"].state_dict(),
        "local_critic": models["local_critic"].state_dict(),
        "opt_generator": optimizers["generator"].state_dict(),
        "opt_critics": optimizers["critics"].state_dict(),
    }
    buf = io.BytesIO()
    torch.save(payload, buf)
    blob = buf.getvalue()
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack(">I", CHECKPOINT_VERSION))
        fh.write(hashlib.sha256(blob).digest())
        fh.write(blob)
    os.replace(tmp, path)
    return path


def load_checkpoint(path):
    """Read and verify a checkpoint file, returning its payload dict."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    header = len(CHECKPOINT_MAGIC) + 4 + 32
    if len(raw) < header or not raw.startswith(CHECKPOINT_MAGIC):
        raise CheckpointError(f"not a checkpoint file: {path}")
    version = struct.unpack(">I", raw[8:12])[0]
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"checkpoint version {version} unsupported (expected {CHECKPOINT_VERSION})"
        )
    digest, blob = raw[12:44], raw[44:]
    if hashlib.sha256(blob).digest() != digest:
        raise CheckpointError(f"checkpoint integrity check failed: {path}")
    try:
        return torch.load(io.BytesIO(blob), map_location="cpu", weights_only=False)
    except Exception as exc:
        raise CheckpointError(f"cannot deserialize checkpoint {path}: {exc}") from exc


def restore_models(ckpt):
    """Rebuild models and optimizers from a checkpoint payload."""
    cfg = TrainConfig.from_flat_dict(ckpt["config"])
    models = build_models(cfg)
    models["generator"].load_state_dict(ckpt["generator"])
    models["global_critic"].load_state_dict(ckpt["global_critic"])
    models["local_critic"].load_state_dict(ckpt["local_critic"])
    optimizers = build_optimizers(models, cfg.lr0)
    optimizers["generator"].load_state_dict(ckpt["opt_generator"])
    optimizers["critics"].load_state_dict(ckpt["opt_critics"])
    return models, optimizers, cfg


def format_metric_line(global_step, epoch, metrics, lr):
    parts = [str(global_step), str(epoch)]
    parts += [f"{metrics[k]:.10g}" for k in METRIC_KEYS]
    parts.append(f"{lr:.10g}")
    return ",".join(parts)


METRIC_HEADER = "step,epoch," + ",".join(METRIC_KEYS) + ",lr"


def train(cfg, corpus, out_dir, resume=None):
    """Run the configured number of epochs over the corpus listing.

    `corpus` is a sequence of HxWx3 images in [-1, 1] at the scale's full
    training resolution. Returns the path of the final checkpoint. With
    `resume` pointing at a compatible checkpoint, continues the identical
    deterministic stream the uninterrupted run would have produced.
    """
    if len(corpus) == 0:
        raise ValueError("empty corpus")
    scale = get_scale(cfg.scale)
    full_hw = scale.full_hw
    for i, image in enumerate(corpus):
        if image.shape[:2] != full_hw:
            raise ValueError(
                f"corpus image {i} is {image.shape[:2]}, expected {full_hw}"
            )
    os.makedirs(out_dir, exist_ok=True)

    start_epoch = 0
    global_step = 0
    if resume is not None:
        ckpt = load_checkpoint(resume)
        if ckpt["fingerprint"] != config_fingerprint(cfg):
            raise CheckpointError(
                "checkpoint fingerprint mismatch: "
                f"{ckpt['fingerprint']} vs {config_fingerprint(cfg)}"
            )
        models, optimizers, _ = restore_models(ckpt)
        start_epoch = ckpt["epoch"]
        global_step = ckpt["global_step"]
        log.info("resumed at epoch %d (step %d) from %s", start_epoch, global_step, resume)
    else:
        models = build_models(cfg)
        optimizers = build_optimizers(models, cfg.lr0)

    cfg.to_file(os.path.join(out_dir, "config.json"))
    mask = build_loss_mask(full_hw[0], full_hw[1], cfg.mask_floor)
    policy = MaskingPolicy()
    detector = models["detector"]

    metrics_path = os.path.join(out_dir, "metrics.csv")
    mode = "a" if resume is not None and os.path.exists(metrics_path) else "w"
    final_path = os.path.join(out_dir, "last.pt")
    with open(metrics_path, mode) as metrics_file:
        if mode == "w":
            metrics_file.write(METRIC_HEADER + "\n")
        for epoch in range(start_epoch, cfg.epochs):
            lr = lr_at(epoch, cfg)
            _set_lr(optimizers, lr)
            order = np.random.default_rng(
                derive_seed(cfg.seed, "order", epoch)
            ).permutation(len(corpus))
            for step_in_epoch, lo in enumerate(range(0, len(order), cfg.batch_size)):
                chunk = order[lo:lo + cfg.batch_size]
                if cfg.augment:
                    examples = [
                        make_example(
                            corpus[int(idx)], detector,
                            np.random.default_rng(
                                derive_seed(cfg.seed, "aug", epoch, pos)
                            ),
                            policy,
                        )
                        for pos, idx in enumerate(chunk, start=lo)
                    ]
                else:
                    examples = [make_eval_example(corpus[int(idx)], detector)
                                for idx in chunk]
                eps_gen = torch.Generator().manual_seed(
                    derive_seed(cfg.seed, "eps", epoch, step_in_epoch)
                )
                metrics = train_step(models, optimizers, collate(examples), cfg,
                                     mask, eps_gen=eps_gen)
                metrics_file.write(format_metric_line(global_step, epoch, metrics, lr) + "\n")
                global_step += 1
            metrics_file.flush()
            if (epoch + 1) % cfg.checkpoint_every == 0 or epoch + 1 == cfg.epochs:
                save_checkpoint(models, optimizers, epoch + 1, global_step, cfg, final_path)
    if not os.path.exists(final_path):
        save_checkpoint(models, optimizers, cfg.epochs, global_step, cfg, final_path)
    return final_path
