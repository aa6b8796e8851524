"""Machine-readable reports for the verification suites: one tab-separated
line per check, optional witness files, and an optional summary figure."""

from __future__ import annotations

import os

from .suites import CaseResult


def write_report(results: list[CaseResult], stream, witness_dir: str | None = None) -> None:
    """One line per check: suite, case id, verdict, witness path."""
    for r in results:
        path = "-"
        if r.witness and witness_dir:
            os.makedirs(witness_dir, exist_ok=True)
            fname = f"{r.suite}_{r.case_id}".replace(":", "_").replace("/", "_")
            path = os.path.join(witness_dir, fname + ".txt")
            with open(path, "w") as fh:
                fh.write(r.witness + "\n")
        verdict = "pass" if r.ok else "fail"
        stream.write(f"{r.suite}\t{r.case_id}\t{verdict}\t{path}\t{r.detail}\n")


def save_figure(results: list[CaseResult], path: str) -> None:
    """Bar chart of pass/fail counts per suite."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    suites: dict[str, list[int]] = {}
    for r in results:
        row = suites.setdefault(r.suite, [0, 0])
        row[0 if r.ok else 1] += 1
    names = sorted(suites)
    passes = [suites[n][0] for n in names]
    fails = [suites[n][1] for n in names]
    fig, ax = plt.subplots(figsize=(max(4, len(names) * 1.2), 3.2))
    xs = range(len(names))
    ax.bar(xs, passes, color="#2a9d8f", label="pass")
    ax.bar(xs, fails, bottom=passes, color="#e76f51", label="fail")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(names, rotation=30, ha="right")
    ax.set_ylabel("checks")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
