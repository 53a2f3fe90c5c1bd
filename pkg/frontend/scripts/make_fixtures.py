"""Regenerate fixtures/frames.json: noise-free reference renders from the
touchguard simulator, used by the client-side frame fidelity test."""

import json
import os

import numpy as np

from touchguard.capsim import SensorConfig, UserProfile, render_frame

OUT = os.path.join(os.path.dirname(__file__), "..", "fixtures", "frames.json")


def main():
    config = SensorConfig(rows=16, cols=16, noise_sigma=0.0)
    rng = np.random.default_rng(0)  # unused by noise-free renders
    cases = []
    gen = np.random.default_rng(42)
    for i in range(20):
        center = (float(gen.uniform(0, 15)), float(gen.uniform(0, 15)))
        pressure = float(gen.uniform(5, 90))
        radius = float(gen.uniform(0.8, 3.0))
        profile = UserProfile(user_id="fixture", finger_radius=radius)
        frame = render_frame(center, profile, config, pressure, rng)
        cases.append({"center": list(center), "pressure": pressure,
                      "radius": radius, "rows": 16, "cols": 16,
                      "frame": frame.tolist()})
    with open(OUT, "w") as f:
        json.dump(cases, f)
    print(f"wrote {len(cases)} cases -> {os.path.normpath(OUT)}")


if __name__ == "__main__":
    main()
