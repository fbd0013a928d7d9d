"""Report files: TSV tables plus rendered figures.

Training writes a per-epoch table and a curves figure next to the
checkpoint; the comparison experiment writes a per-seed table and a paired
scatter figure. Matplotlib is imported lazily with the Agg backend so the
plain CLI paths stay fast and headless-safe.
"""

from __future__ import annotations

from pathlib import Path

from .training import TrainReport


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def write_train_report(report: TrainReport, out_dir: str | Path) -> tuple[Path, Path]:
    """Write report.tsv and training_curves.png; returns both paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    tsv = out_dir / "report.tsv"
    lines = ["epoch\ttoken_nll\thalo_nll\ttotal\tseconds"]
    for e in report.epochs:
        lines.append(f"{e.epoch}\t{e.token_nll:.6f}\t{e.halo_nll:.6f}\t{e.total:.6f}\t{e.seconds:.3f}")
    lines.append("")
    lines.append("dev_epoch\tbleu\tf1_pred\tf1_arg")
    for d in report.dev_evals:
        lines.append(f"{d.epoch}\t{d.bleu:.6f}\t{d.f1_pred:.6f}\t{d.f1_arg:.6f}")
    lines.append("")
    lines.append(f"best_epoch\t{report.best_epoch}")
    lines.append(f"best_bleu\t{report.best_bleu:.6f}")
    tsv.write_text("\n".join(lines) + "\n", encoding="utf-8")

    fig_path = out_dir / "training_curves.png"
    plt = _pyplot()
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.2))
    epochs = [e.epoch for e in report.epochs]
    ax1.plot(epochs, [e.token_nll for e in report.epochs], label="token nll / token")
    if any(e.halo_nll for e in report.epochs):
        ax1.plot(epochs, [e.halo_nll for e in report.epochs], label="halo nll / token")
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("loss")
    ax1.legend(fontsize=8)
    if report.dev_evals:
        dev_epochs = [d.epoch for d in report.dev_evals]
        ax2.plot(dev_epochs, [d.bleu for d in report.dev_evals], marker="o", label="dev BLEU")
        ax2.plot(dev_epochs, [d.f1_pred for d in report.dev_evals], marker="s", label="dev F1 pred")
        ax2.plot(dev_epochs, [d.f1_arg for d in report.dev_evals], marker="^", label="dev F1 arg")
        ax2.axvline(report.best_epoch, color="gray", linestyle=":", linewidth=1)
        ax2.set_xlabel("epoch")
        ax2.set_ylabel("metric")
        ax2.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(fig_path, dpi=120)
    plt.close(fig)
    return tsv, fig_path


def write_comparison_report(rows: list[dict], means: dict, out_dir: str | Path) -> tuple[Path, Path]:
    """Per-seed baseline-vs-halo table and paired metric figure.

    ``rows`` carry one dict per seed with keys seed, then
    {base,halo}_{bleu,f1_pred,f1_arg,tag_acc}; ``means`` the column means.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    cols = ["bleu", "f1_pred", "f1_arg", "tag_acc"]
    tsv = out_dir / "comparison.tsv"
    header = "seed\t" + "\t".join(f"base_{c}\thalo_{c}" for c in cols)
    lines = [header]
    for row in rows:
        cells = [str(row["seed"])]
        for c in cols:
            cells.append(f"{row[f'base_{c}']:.6f}")
            cells.append(f"{row[f'halo_{c}']:.6f}")
        lines.append("\t".join(cells))
    mean_cells = ["mean"]
    for c in cols:
        mean_cells.append(f"{means[f'base_{c}']:.6f}")
        mean_cells.append(f"{means[f'halo_{c}']:.6f}")
    lines.append("\t".join(mean_cells))
    tsv.write_text("\n".join(lines) + "\n", encoding="utf-8")

    fig_path = out_dir / "comparison.png"
    plt = _pyplot()
    fig, axes = plt.subplots(1, len(cols), figsize=(3.0 * len(cols), 3.2))
    for ax, c in zip(axes, cols):
        base = [row[f"base_{c}"] for row in rows]
        halo = [row[f"halo_{c}"] for row in rows]
        for b, h in zip(base, halo):
            ax.plot([0, 1], [b, h], color="gray", linewidth=0.8)
        ax.plot([0] * len(base), base, "o", label="baseline")
        ax.plot([1] * len(halo), halo, "o", label="halo")
        ax.plot([0, 1], [means[f"base_{c}"], means[f"halo_{c}"]], "k--", linewidth=1.5)
        ax.set_xticks([0, 1])
        ax.set_xticklabels(["base", "halo"])
        ax.set_title(c, fontsize=9)
    axes[0].legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(fig_path, dpi=120)
    plt.close(fig)
    return tsv, fig_path
