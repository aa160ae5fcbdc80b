#!/usr/bin/env python3
"""Rewrites assets/manifest.json with current SHA-256 hashes."""
import hashlib
import json
import pathlib

root = pathlib.Path(__file__).resolve().parent.parent / "assets"
provenance = {
    "spaces": "published-design-space",
    "constraints": "published-constraint-examples",
    "models": "calibrated (base cycles: published benchmark instruction counts)",
}
files = []
for path in sorted(root.rglob("*.json")):
    rel = path.relative_to(root).as_posix()
    if rel == "manifest.json":
        continue
    files.append({
        "path": rel,
        "sha256": hashlib.sha256(path.read_bytes()).hexdigest(),
        "provenance": provenance[rel.split("/")[0]],
    })
processors = {}
for space in sorted((root / "spaces").glob("*.json")):
    name = space.stem
    entry = {"space": f"spaces/{name}.json", "model": f"models/{name}.json"}
    if (root / "constraints" / f"{name}.json").exists():
        entry["constraints"] = f"constraints/{name}.json"
    processors[name] = entry
manifest = {"version": 1, "files": files, "processors": processors}
(root / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
