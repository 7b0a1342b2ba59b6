"""Configs, runs, field dumps and manifests.

Runs the bundled kernel demo into a temporary directory, inspects the
dump header, recomputes a residual from the dumped fields and shows that
a second run produces the same manifest bytes.
"""

import tempfile
from pathlib import Path

from dressing_lab.cli import main
from dressing_lab.config import load_config
from dressing_lab.fieldio import inspect_field, load_field
from dressing_lab.runner import run_experiment

cfg = Path(__file__).resolve().parents[1] / "configs" / "kernel_demo.cfg"
spec = load_config(cfg)
print("kind:", spec.kind, " grid:", spec.grid.counts, " dt:", spec.dt)

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    code, manifest = run_experiment(spec, out=tmp / "a", seed=5)
    print("exit code:", code)
    print(manifest.read_text())
    print((tmp / "a" / "reports" / "residuals.tsv").read_text())

    # %% header only, then the payload
    d = inspect_field(tmp / "a" / "fields" / "u.drsf")
    print("shape from header:", d.shape, " payload read:", d.values is not None)
    print("payload max:", abs(load_field(tmp / "a" / "fields" / "u.drsf").values).max())

    # %% same seed, same manifest bytes
    _, again = run_experiment(spec, out=tmp / "b", seed=5)
    print("manifests identical:", manifest.read_bytes() == again.read_bytes())

    # %% the CLI verbs wrap the same calls
    main(["inspect", str(tmp / "a" / "fields" / "u.drsf")])
