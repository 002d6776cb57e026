"""Figure rendering for sweep tables."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

AXIS_LABELS = {"snr_db": "SNR (dB)", "sigma_e": r"$\sigma_e$"}
MARKERS = {"MMSE": "o", "MMSE-RB": "s", "MMSE-RB-SP": "^", "MMSE-RB-RD": "D"}


def plot_sweep(table, path, title=None):
    """Sum-rate versus the swept axis, one errorbar series per scheme."""
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    for scheme in table.schemes:
        pts = table.series(scheme)
        x = [p[0] for p in pts]
        y = [p[1] for p in pts]
        ci = [p[2] for p in pts]
        ax.errorbar(x, y, yerr=ci, marker=MARKERS.get(scheme, "x"), capsize=3,
                    linewidth=1.2, markersize=5, label=scheme)
    ax.set_xlabel(AXIS_LABELS.get(table.axis_name, table.axis_name))
    ax.set_ylabel("Sum-rate (bits/s/Hz)")
    ax.grid(True, linestyle=":", linewidth=0.6)
    ax.legend(frameon=False)
    if title:
        ax.set_title(title, fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
