"""Write a ready-to-run CLI input set: scenarios.csv, profile_gen.csv and config.json."""
import argparse
import json
from pathlib import Path

from eqforward.fixtures import yearly_market
from eqforward.scenario_model import save_profile, save_scenarios


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scenarios", type=int, default=400)
    ap.add_argument("--out", default="sample")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = yearly_market(args.scenarios)
    save_scenarios(cfg.scenarios, out / "scenarios.csv")
    save_profile(cfg.agent("gen").profile, out / "profile_gen.csv")
    doc = {
        "scenarios": "scenarios.csv",
        "alpha": 0.9,
        "agents": [
            {"id": "gen", "kind": "generator", "lambda": 0.5, "profile": "profile_gen.csv"},
            {"id": "load", "kind": "load", "lambda": 0.5, "profile": 100},
            {"id": "desk", "kind": "trader", "lambda": 0.8, "q_max": 50},
        ],
        "contract": {"periods": [5]},
        "tree": {"stages": [{"periods": [p], "branching": 2} for p in (2, 3, 4)]},
        "curves": {"grid": "30:110:41"},
        "output": "out",
    }
    (out / "config.json").write_text(json.dumps(doc, indent=1) + "\n")
    print(f"wrote {out / 'config.json'}")


if __name__ == "__main__":
    main()
