"""Actor-critic network for key-patch selection.

Five shared conv+maxpool stages feed a spatial pyramid pooling layer, so
any frame size of at least 32x32 maps to the same flat feature length; the
fully connected trunk then splits into a P^2-way actor head and a scalar
critic head.
"""

from __future__ import annotations

import json

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

CHECKPOINT_HEADER = "DIMBA-POLICY-1"

CONV_CHANNELS = (16, 32, 32, 64, 64)
SPP_LEVELS = (1, 2, 4)
FC_SIZES = (256, 128)
MIN_INPUT = 32
_INPUT_SCALE = 255.0


class PolicyError(Exception):
    pass


class UndersizedInputError(PolicyError):
    pass


class CheckpointFormatError(PolicyError):
    pass


def spp_pool(feature_map, levels=SPP_LEVELS):
    """Spatial pyramid max pooling of a (C, H, W) map to a flat vector.

    Each level ``n`` max-pools over an n x n grid of ceil-divided regions;
    levels larger than the spatial size degenerate to single pixels. Output
    length is ``C * sum(n^2)`` regardless of H and W.
    """
    was_numpy = isinstance(feature_map, np.ndarray)
    t = torch.as_tensor(np.asarray(feature_map, dtype=np.float64)) if was_numpy \
        else feature_map
    if t.dim() != 3:
        raise PolicyError(f"expected (C, H, W) feature map, got {tuple(t.shape)}")
    parts = [F.adaptive_max_pool2d(t.unsqueeze(0), n).flatten(1) for n in levels]
    out = torch.cat(parts, dim=1).squeeze(0)
    return out.numpy() if was_numpy else out


class PolicyNetwork(nn.Module):
    """Shared conv trunk + SPP + 3 fully connected layers and two heads."""

    def __init__(self, grid_size: int = 16, in_channels: int = 3):
        super().__init__()
        self.grid_size = grid_size
        chans = (in_channels,) + CONV_CHANNELS
        self.convs = nn.ModuleList(
            nn.Conv2d(chans[i], chans[i + 1], kernel_size=3, padding=1)
            for i in range(len(CONV_CHANNELS)))
        feat = CONV_CHANNELS[-1] * sum(n * n for n in SPP_LEVELS)
        self.fc1 = nn.Linear(feat, FC_SIZES[0])
        self.fc2 = nn.Linear(FC_SIZES[0], FC_SIZES[1])
        self.actor = nn.Linear(FC_SIZES[1], grid_size * grid_size)
        self.critic = nn.Linear(FC_SIZES[1], 1)

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        if x.shape[-2] < MIN_INPUT or x.shape[-1] < MIN_INPUT:
            raise UndersizedInputError(
                f"input {tuple(x.shape[-2:])} below {MIN_INPUT}x{MIN_INPUT}")
        for conv in self.convs:
            x = F.max_pool2d(F.relu(conv(x)), 2)
        x = torch.stack([spp_pool(sample, SPP_LEVELS) for sample in x])
        x = F.relu(self.fc1(x))
        x = F.relu(self.fc2(x))
        return self.actor(x), self.critic(x).squeeze(-1)


def state_to_tensor(state_image: np.ndarray, dtype=torch.float32) -> torch.Tensor:
    """(H, W, 3) real image -> scaled (1, 3, H, W) network input."""
    arr = np.ascontiguousarray(
        np.asarray(state_image, dtype=np.float64).transpose(2, 0, 1))
    return torch.from_numpy(arr).unsqueeze(0).to(dtype) / _INPUT_SCALE


def policy_forward(net: PolicyNetwork, state_image: np.ndarray
                   ) -> tuple[np.ndarray, float]:
    """Action distribution over the P^2 grid cells plus the critic value."""
    net.eval()
    with torch.no_grad():
        logits, value = net(state_to_tensor(state_image))
        probs = torch.softmax(logits, dim=-1)
    return probs.squeeze(0).numpy().astype(np.float64), float(value.item())


def save_policy(net: PolicyNetwork, path: str) -> None:
    """Versioned checkpoint: header, JSON shape manifest, then raw
    little-endian float32 parameters in manifest order."""
    state = net.state_dict()
    manifest = {
        "grid_size": net.grid_size,
        "params": [{"name": k, "shape": list(v.shape)} for k, v in state.items()],
    }
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_HEADER.encode() + b"\n")
        fh.write(json.dumps(manifest, sort_keys=True).encode() + b"\n")
        for v in state.values():
            fh.write(v.detach().numpy().astype("<f4").tobytes())


def load_policy(path: str) -> PolicyNetwork:
    with open(path, "rb") as fh:
        header = fh.readline().strip().decode(errors="replace")
        if header != CHECKPOINT_HEADER:
            raise CheckpointFormatError(f"bad header {header!r}")
        try:
            manifest = json.loads(fh.readline())
        except json.JSONDecodeError as exc:
            raise CheckpointFormatError("unreadable manifest") from exc
        net = PolicyNetwork(grid_size=int(manifest["grid_size"]))
        state = {}
        for item in manifest["params"]:
            shape = tuple(int(s) for s in item["shape"])
            count = int(np.prod(shape)) if shape else 1
            raw = fh.read(4 * count)
            if len(raw) != 4 * count:
                raise CheckpointFormatError(f"truncated tensor {item['name']}")
            arr = np.frombuffer(raw, dtype="<f4").reshape(shape)
            state[item["name"]] = torch.from_numpy(arr.copy())
    try:
        net.load_state_dict(state)
    except RuntimeError as exc:
        raise CheckpointFormatError(str(exc)) from exc
    return net


def fresh_policy(grid_size: int, seed: int) -> PolicyNetwork:
    """Deterministically initialized network for seed-pinned runs."""
    torch.manual_seed(int(seed) & 0x7FFFFFFF)
    return PolicyNetwork(grid_size=grid_size)
