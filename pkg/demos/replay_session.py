"""
An offline pipeline run from recorded responses
===============================================

The package ships a scripted session over three small family trees. Every
model call is answered from a fixture keyed by the prompt fingerprint, so the
run is reproducible and needs no network or API key.
"""
import json
import shutil
import tempfile
from pathlib import Path

from llmtsp import demo_session_dir
from llmtsp.cli import main

work = Path(tempfile.mkdtemp())
session = work / "session"
shutil.copytree(Path(str(demo_session_dir())), session)
print((session / "pipeline.cfg").read_text())

# %%
# Mine rules, partition, predict per subgraph and score, all in one go.
main(["pipeline", "--config", str(session / "pipeline.cfg"), "--out", str(work / "run")])

# %%
# Kept rules carry their qualities; rejected lines say why they were dropped.
run = work / "run"
print((run / "rules.txt").read_text())
print((run / "rules_rejects.txt").read_text())

# %%
# One of the scripted answers cites premises that are not in its subgraph.
# The audit lists them by relation.
report = json.loads((run / "hallucination.json").read_text())
print("nonexistent premises by relation:", report["nonexistent_by_relation"])
print("hand annotation:", json.loads((session / "annotations.json").read_text())
      ["nonexistent_by_relation"])

shutil.rmtree(work)
