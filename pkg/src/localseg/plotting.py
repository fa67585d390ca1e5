"""Report figures written next to the textual CLI output."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RC = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.fontsize": 8,
    "legend.frameon": False,
    "savefig.dpi": 120,
    "savefig.bbox": "tight",
}


def _smooth(values, window):
    values = np.asarray(values, dtype=np.float64)
    if window <= 1 or values.size < window:
        return values
    kernel = np.ones(window) / window
    return np.convolve(values, kernel, mode="valid")


def plot_loss_trace(trace, path, window: int = 50):
    """Running-mean curves of L_m, L_a, L_r and the weighted total."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(5.5, 3.2))
        for attr, label in (("total", "L"), ("m", "L_m"), ("a", "L_a"), ("r", "L_r")):
            ys = _smooth([getattr(b, attr) for b in trace], window)
            xs = np.arange(ys.size) + (min(window, len(trace)) - 1)
            ax.plot(xs, ys, label=label, lw=1.6 if attr == "total" else 1.0)
        ax.set_xlabel("episode")
        ax.set_ylabel(f"loss ({window}-episode mean)")
        ax.legend(ncol=4)
        fig.savefig(path)
        plt.close(fig)


def plot_class_iou(reports: dict, path):
    """Grouped bars of per-class IoU, one group member per labelled report."""
    labels = list(reports)
    classes = []
    for rep in reports.values():
        classes += [c for c in rep.per_class_iou if c not in classes]
    x = np.arange(len(classes) + 1)
    width = 0.8 / max(len(labels), 1)
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(1.2 + 0.9 * len(x), 3.0))
        for j, label in enumerate(labels):
            rep = reports[label]
            vals = [rep.per_class_iou.get(c, np.nan) for c in classes] + [rep.miou]
            ax.bar(x + (j - (len(labels) - 1) / 2) * width, vals, width,
                   label=f"{label} (FB-IoU {rep.fb_iou:.3f})")
        ax.set_xticks(x, classes + ["mIoU"])
        ax.set_ylim(0, 1)
        ax.set_ylabel("IoU")
        ax.legend()
        fig.savefig(path)
        plt.close(fig)


def plot_attention_panel(query, supports, attention, prob, path):
    """Query, support masks, upsampled attention and prediction side by side."""
    panels = [("query", query, None)]
    for i, (img, mask) in enumerate(supports):
        panels.append((f"support {i + 1}", img, mask))
    panels.append(("attention", attention, "map"))
    if prob is not None:
        panels.append(("prediction", prob, "map"))
    with plt.rc_context(RC):
        fig, axes = plt.subplots(1, len(panels), figsize=(1.9 * len(panels), 2.1))
        for ax, (title, img, extra) in zip(np.atleast_1d(axes), panels):
            if isinstance(extra, str):
                ax.imshow(img, cmap="magma", vmin=0, vmax=1)
            else:
                arr = np.asarray(img)
                ax.imshow(arr[..., 0] if arr.shape[-1] == 1 else arr,
                          cmap="gray", vmin=0, vmax=1)
                if extra is not None:
                    ax.contour(extra, levels=[0.5], colors="w", linewidths=0.8)
            ax.set_title(title)
            ax.set_axis_off()
        fig.savefig(path)
        plt.close(fig)
