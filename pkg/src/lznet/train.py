"""Training and evaluation loops for the addition, copy and UCR tasks."""

from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from lznet import engine as E
from lznet import tasks as data
from lznet.cells import init_lstm, init_novelty
from lznet.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from lznet.config import TrainConfig, config_from_dict
from lznet.layer import init_head, lstm_forward, lz_forward, readout
from lznet.memory import AssociativeMemory
from lznet.optim import adam_step, clip_global_norm, rmsprop_step

log = logging.getLogger(__name__)

METRICS_HEADER = ("epoch", "split", "loss", "accuracy", "mean_p", "wallclock_s")
_EVAL_STREAM = 1_000_003


class TrainingError(RuntimeError):
    pass


class SequenceModel:
    """LSTM or LZ layer followed by an affine head."""

    def __init__(self, cfg: TrainConfig, input_size: int, output_size: int):
        self.cfg = cfg
        H = cfg.hidden
        self.lstm = init_lstm(input_size, H, cfg.seed)
        self.novelty = init_novelty(H, cfg.bias_init, cfg.seed) if cfg.model == "lz" else None
        self.head = init_head(H, output_size, cfg.seed)
        beta = cfg.hopfield_beta or None
        self.memory = AssociativeMemory(cfg.backend, H, cfg.seed, beta) if cfg.model == "lz" else None

    @property
    def params(self) -> dict[str, E.Tensor]:
        named = {**self.lstm.named(), **self.head.named()}
        if self.novelty is not None:
            named.update(self.novelty.named())
        return named

    def run(self, x: np.ndarray, draw_seed=(0,), seq_ids=None, every_step: bool = False):
        """Returns ``(outputs, mean_p)``; ``outputs`` is the head applied to the
        last step, or to every step stacked on axis 1 when ``every_step``."""
        if self.cfg.model == "lstm":
            hs = lstm_forward(x, self.lstm)
            mean_p = None
            last = self.head(hs[-1])
        else:
            out = lz_forward(
                x,
                self.lstm,
                self.novelty,
                self.cfg.backend,
                self.cfg.mode,
                seed=self.cfg.seed,
                reset_cell=self.cfg.reset_cell,
                memory=self.memory,
                seq_ids=seq_ids,
                draw_seed=draw_seed,
            )
            hs = out.h_hats
            mean_p = float(out.p_array().mean())
            last = readout(out, self.head, self.cfg.readout)
        if every_step:
            return E.stack([self.head(h) for h in hs], axis=1), mean_p
        return last, mean_p

    def load_tensors(self, tensors: dict[str, np.ndarray]) -> None:
        for name, p in self.params.items():
            if name not in tensors:
                raise TrainingError(f"checkpoint lacks parameter {name}")
            if tensors[name].shape != p.shape:
                raise TrainingError(f"shape mismatch for {name}: {tensors[name].shape} vs {p.shape}")
            p.data = tensors[name].copy()


# ---------------------------------------------------------------- tasks


@dataclass
class Batch:
    x: np.ndarray
    y: np.ndarray
    ids: np.ndarray


class AdditionTask:
    classification = False

    def __init__(self, cfg: TrainConfig):
        self.cfg = cfg
        self.input_size, self.output_size = 2, 1

    def train_batches(self, epoch: int) -> Iterator[Batch]:
        B = self.cfg.batch
        for step in range(self.cfg.steps_per_epoch):
            b = data.gen_addition(self.cfg.seq_len, B, [self.cfg.seed, epoch, step])
            yield Batch(b.inputs(), b.targets, np.arange(step * B, (step + 1) * B))

    def eval_batches(self) -> Iterator[Batch]:
        b = data.gen_addition(self.cfg.seq_len, self.cfg.eval_size, [self.cfg.seed, _EVAL_STREAM])
        yield from _chunks(b.inputs(), b.targets, self.cfg.batch)

    def loss(self, model: SequenceModel, batch: Batch, draw_seed):
        pred, mean_p = model.run(batch.x, draw_seed, batch.ids)
        loss = E.mse_loss(E.reshape(pred, batch.y.shape), batch.y)
        return loss, None, mean_p


class CopyTask:
    classification = True

    def __init__(self, cfg: TrainConfig):
        self.cfg = cfg
        self.input_size = cfg.copy_m + 2
        self.output_size = cfg.copy_m + 1

    def _gen(self, B, seed):
        c = self.cfg
        return data.gen_copy(c.copy_n, c.copy_m, c.seq_len, B, seed)

    def train_batches(self, epoch: int) -> Iterator[Batch]:
        B = self.cfg.batch
        for step in range(self.cfg.steps_per_epoch):
            b = self._gen(B, [self.cfg.seed, epoch, step])
            yield Batch(b.one_hot(), b.targets, np.arange(step * B, (step + 1) * B))

    def eval_batches(self) -> Iterator[Batch]:
        b = self._gen(self.cfg.eval_size, [self.cfg.seed, _EVAL_STREAM])
        yield from _chunks(b.one_hot(), b.targets, self.cfg.batch)

    def loss(self, model: SequenceModel, batch: Batch, draw_seed):
        logits, mean_p = model.run(batch.x, draw_seed, batch.ids, every_step=True)
        loss = E.softmax_cross_entropy(logits, batch.y)
        correct = float(np.mean(logits.data.argmax(axis=-1) == batch.y))
        return loss, correct, mean_p


class UcrTask:
    classification = True

    def __init__(self, cfg: TrainConfig):
        self.cfg = cfg
        ds = data.load_ucr_tsv(cfg.ucr_train, cfg.ucr_test or None)
        if cfg.znorm:
            ds = data.znormalize(ds)
        self.dataset = ds
        self.X, self.y = ds.arrays("train")
        self.Xt, self.yt = ds.arrays("test") if ds.test else (self.X, self.y)
        self.input_size, self.output_size = 1, max(ds.n_classes, 2)

    def train_batches(self, epoch: int) -> Iterator[Batch]:
        order = np.random.default_rng([self.cfg.seed, epoch]).permutation(len(self.y))
        B = self.cfg.batch
        for start in range(0, len(order), B):
            idx = order[start : start + B]
            yield Batch(self.X[idx, :, None], self.y[idx], idx)

    def eval_batches(self) -> Iterator[Batch]:
        yield from _chunks(self.Xt[:, :, None], self.yt, self.cfg.batch)

    def loss(self, model: SequenceModel, batch: Batch, draw_seed):
        logits, mean_p = model.run(batch.x, draw_seed, batch.ids)
        loss = E.softmax_cross_entropy(logits, batch.y)
        correct = float(np.mean(logits.data.argmax(axis=-1) == batch.y))
        return loss, correct, mean_p


def _chunks(x, y, size) -> Iterator[Batch]:
    for start in range(0, len(y), size):
        yield Batch(x[start : start + size], y[start : start + size], np.arange(start, min(start + size, len(y))))


def make_task(cfg: TrainConfig):
    return {"addition": AdditionTask, "copy": CopyTask, "ucr": UcrTask}[cfg.task](cfg)


# ---------------------------------------------------------------- loops


def _weighted(values, weights):
    values = [v for v in values if v is not None]
    if not values:
        return None
    return float(np.dot(values, weights[: len(values)]) / np.sum(weights[: len(values)]))


def evaluate(model: SequenceModel, task) -> dict:
    """Mean loss over the evaluation split (plus accuracy and mean p where defined)."""
    losses, accs, ps, sizes = [], [], [], []
    for batch in task.eval_batches():
        loss, acc, mean_p = task.loss(model, batch, (model.cfg.seed, _EVAL_STREAM))
        losses.append(loss.item())
        accs.append(acc)
        ps.append(mean_p)
        sizes.append(len(batch.y))
    w = np.asarray(sizes, dtype=np.float64)
    return {
        "loss": float(np.dot(losses, w) / w.sum()),
        "accuracy": _weighted(accs, w) if task.classification else None,
        "mean_p": _weighted(ps, w),
    }


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass
class TrainResult:
    metrics_path: Path
    checkpoint_path: Path
    rows: list[dict]
    model: SequenceModel


def _optimizer_tensors(state: dict) -> dict[str, np.ndarray]:
    out = {}
    for slot in ("m", "v"):
        for name, arr in state.get(slot, {}).items():
            out[f"optim.{slot}.{name}"] = arr
    return out


def make_checkpoint(cfg: TrainConfig, model: SequenceModel, opt_state: dict, epoch: int, best: float | None) -> Checkpoint:
    tensors = {name: p.data for name, p in model.params.items()}
    tensors.update(_optimizer_tensors(opt_state))
    if model.memory is not None and model.memory.is_vsa:
        tensors["memory.tag"] = model.memory.tag
    return Checkpoint(
        tensors=tensors,
        config=cfg.to_dict(),
        rng_state={"seed": cfg.seed, "epoch": epoch},
        meta={"epoch": epoch, "optim_t": opt_state.get("t", 0), "best_loss": best},
    )


def _restore(ckpt: Checkpoint, model: SequenceModel) -> tuple[dict, int, float | None]:
    model.load_tensors(ckpt.tensors)
    state: dict = {"t": int(ckpt.meta.get("optim_t", 0))}
    for key, arr in ckpt.tensors.items():
        if key.startswith("optim."):
            _, slot, name = key.split(".", 2)
            state.setdefault(slot, {})[name] = arr.copy()
    return state, int(ckpt.meta.get("epoch", 0)), ckpt.meta.get("best_loss")


def train(cfg: TrainConfig, resume=None) -> TrainResult:
    """Run ``cfg.epochs`` epochs, writing ``metrics.csv`` and ``final.ckpt`` under ``cfg.out_dir``.

    With ``resume`` (a checkpoint path) training continues after the saved
    epoch and new rows are appended to the existing metrics file.
    """
    cfg.validate()
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics_path = out_dir / cfg.metrics_file
    task = make_task(cfg)
    model = SequenceModel(cfg, task.input_size, task.output_size)
    params = model.params
    opt_state: dict = {}
    last_epoch, best = 0, None
    if resume is not None:
        opt_state, last_epoch, best = _restore(load_checkpoint(resume), model)

    rows: list[dict] = []
    t0 = time.perf_counter()

    def emit(epoch, split, loss, acc, mean_p):
        if not np.isfinite(loss):
            raise TrainingError(f"non-finite {split} loss at epoch {epoch}")
        row = {
            "epoch": epoch,
            "split": split,
            "loss": loss,
            "accuracy": acc,
            "mean_p": mean_p,
            "wallclock_s": round(time.perf_counter() - t0, 3) if cfg.wallclock else None,
        }
        rows.append(row)
        writer.writerow([_fmt(row[k]) for k in METRICS_HEADER])
        fh.flush()

    append = resume is not None and metrics_path.exists()
    with metrics_path.open("a" if append else "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if not append:
            writer.writerow(METRICS_HEADER)
        if last_epoch == 0:
            ev = evaluate(model, task)
            emit(0, "test", ev["loss"], ev["accuracy"], ev["mean_p"])

        for epoch in range(last_epoch + 1, cfg.epochs + 1):
            losses, accs, ps = [], [], []
            for step, batch in enumerate(task.train_batches(epoch)):
                with E.Tape() as tape:
                    loss, acc, mean_p = task.loss(model, batch, (cfg.seed, epoch, step))
                if not np.isfinite(loss.item()):
                    raise TrainingError(f"non-finite training loss at epoch {epoch}, step {step}")
                g = tape.backward(loss, list(params.values()))
                grads = {name: g[p] for name, p in params.items()}
                clip_global_norm(grads, cfg.clip)
                try:
                    if cfg.optimizer == "rmsprop":
                        rmsprop_step(params, grads, opt_state, cfg.lr, cfg.decay, cfg.eps)
                    else:
                        adam_step(params, grads, opt_state, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
                except FloatingPointError as exc:
                    raise TrainingError(f"epoch {epoch}: {exc}") from None
                losses.append(loss.item())
                accs.append(acc)
                ps.append(mean_p)
            w = np.ones(len(losses))
            train_loss = float(np.mean(losses))
            emit(epoch, "train", train_loss, _weighted(accs, w), _weighted(ps, w))
            ev = evaluate(model, task)
            emit(epoch, "test", ev["loss"], ev["accuracy"], ev["mean_p"])
            log.info("epoch %d train %.5f test %.5f", epoch, np.mean(losses), ev["loss"])
            if best is None or ev["loss"] < best:
                best = ev["loss"]
                save_checkpoint(out_dir / "best.ckpt", make_checkpoint(cfg, model, opt_state, epoch, best))
            last_epoch = epoch
            if train_loss < cfg.stop_loss:
                log.info("train loss %.5f below stop_loss at epoch %d", train_loss, epoch)
                break

    ckpt_path = out_dir / "final.ckpt"
    save_checkpoint(ckpt_path, make_checkpoint(cfg, model, opt_state, last_epoch, best))
    return TrainResult(metrics_path, ckpt_path, rows, model)


def evaluate_checkpoint(path, overrides: dict | None = None) -> dict:
    ckpt = load_checkpoint(path)
    cfg = config_from_dict({**ckpt.config, **(overrides or {})})
    task = make_task(cfg)
    model = SequenceModel(cfg, task.input_size, task.output_size)
    model.load_tensors(ckpt.tensors)
    return evaluate(model, task)


def read_metrics(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def metrics_text(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(METRICS_HEADER)
    for row in rows:
        writer.writerow([_fmt(row[k]) for k in METRICS_HEADER])
    return buf.getvalue()
