"""Attack a tracker served over TCP by the bridge (cross-language check).

Requires the bridge to be built first:

    cd bridge && npm install && npm run build

The engine writes frames as PNGs, the node process answers the
newline-delimited JSON protocol, and the attack runs unchanged.
"""

import os
import subprocess
import sys
import tempfile

from advtrack.config import build_config
from advtrack.corpus import generate_corpus
from advtrack.pipeline import run_corpus
from advtrack.trackers import NccConfig, NccTracker, RemoteTracker

cli = os.path.join(os.path.dirname(__file__), "..", "bridge", "dist", "cli.js")
if not os.path.exists(cli):
    sys.exit("bridge not built; run `npm install && npm run build` in bridge/")

proc = subprocess.Popen(["node", cli, "--port", "0", "--tracker", "ncc",
                         "--radius", "16"], stdout=subprocess.PIPE, text=True)
port = int(proc.stdout.readline().split()[1])
print(f"bridge listening on port {port}")

config = build_config({
    "iterations": 12, "candidates": 4, "pool_size": 6, "n_candidates": 3,
    "grid_size": 4, "probes": 3, "attack_iterations": 2, "bs_tolerance": 8.0,
    "finetune_episodes": 0, "search_radius": 16, "seed": 5,
})
videos = generate_corpus(seed=101, n_videos=1, n_frames=20)

with tempfile.TemporaryDirectory() as workdir:
    remote = RemoteTracker(f"127.0.0.1:{port}", workdir)
    print(f"handshake: name={remote.name} parallel={remote.parallel}")
    remote_rep = run_corpus(videos, config, tracker=remote)[0]
    remote.close()
proc.wait(timeout=10)

local_rep = run_corpus(videos, config,
                       tracker=NccTracker(NccConfig(search_radius=16)))[0]

print(f"\nremote: tp={remote_rep.tp_final:.6f} queries={remote_rep.queries}")
print(f"local:  tp={local_rep.tp_final:.6f} queries={local_rep.queries}")
print("adversarial AUC match:",
      abs(remote_rep.adversarial.success_auc
          - local_rep.adversarial.success_auc) < 1e-9)
