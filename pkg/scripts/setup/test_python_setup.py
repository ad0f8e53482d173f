#!/usr/bin/env python3
"""
Check that the Python environment can run OMAD training and tests
"""

import logging
import os
import sys
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parents[2]
sys.path.insert(0, str(REPO_ROOT))

# (import name, display name, lowest major version, first unsupported major version)
STACK = [
    ("numpy", "NumPy", 1, 2),
    ("scipy", "SciPy", 1, 2),
    ("matplotlib", "Matplotlib", 3, 4),
    ("dotenv", "python-dotenv", 0, 2),
    ("pytest", "pytest", 6, 8),
]


def check_interpreter():
    """Python 3.9 or newer"""
    version = sys.version_info
    print(f"🐍 Interpreter {version.major}.{version.minor}.{version.micro} at {sys.executable}")
    ok = version >= (3, 9)
    print("✅ supported" if ok else "❌ OMAD needs Python 3.9+")
    return ok


def check_stack():
    """Every package of requirements.txt imports and sits inside its pinned major range"""
    print("\n📦 Dependency stack")
    missing = []
    for module_name, label, low, high in STACK:
        try:
            module = __import__(module_name)
        except ImportError as e:
            print(f"❌ {label}: {e}")
            missing.append(label)
            continue
        version = getattr(module, "__version__", "0")
        major = int(version.split(".")[0]) if version[0].isdigit() else low
        if low <= major < high:
            print(f"✅ {label} {version}")
        else:
            print(f"⚠️  {label} {version} is outside {low}.x-{high - 1}.x")
    return not missing


def check_gradients():
    """Reverse-mode gradient of sum(w * x * x) equals x * x"""
    print("\n🔢 Autodiff")
    import numpy as np
    from omad.ndiff import Tensor, backward

    x = np.array([0.5, -1.0, 2.0])
    w = Tensor(np.ones(3), requires_grad=True)
    backward((w * x * x).sum())
    ok = np.allclose(w.grad, x * x)
    print("✅ gradients match" if ok else f"❌ got {w.grad}, expected {x * x}")
    return ok


def check_agents():
    """Build agents for two-agent coopnav, sample one joint action and score it with the critic"""
    print("\n🔬 Sampler and critic")
    import numpy as np
    from omad.diffusion import sample_action
    from omad.envs import make_env
    from omad.ndiff import no_grad
    from omad.trainer import AgentSet, TrainerConfig

    env = make_env("coopnav", n_agents=2)
    config = TrainerConfig(actor_hidden=(16,), critic_hidden=(16,), time_embedding_dim=4, n_atoms=11)
    agents = AgentSet.build(env.spec, config, np.random.default_rng(0))
    states = np.stack([env.reset(k) for k in range(4)])
    rng = np.random.default_rng(1)
    with no_grad():
        actions = np.concatenate([sample_action(states, p, rng).actions() for p in agents.targets], axis=1)
        agents.critic.eval()
        q = agents.critic.q_values(states, actions).data
    ok = bool(np.all(np.isfinite(actions)) and np.all(np.abs(actions) <= env.spec.action_bound)
              and np.all(np.isfinite(q)))
    print(f"   joint actions {actions.shape}, Q range [{q.min():.3f}, {q.max():.3f}]")
    print("✅ finite and inside the action box" if ok else "❌ sampler or critic produced bad values")
    return ok


def check_configs():
    """Bundled run configs parse and validate"""
    print("\n🗂️  Bundled configs")
    from omad.errors import ConfigError
    from omad.harness.config import load_config

    logging.getLogger("omad").setLevel(logging.ERROR)
    ok = True
    for path in sorted((REPO_ROOT / "configs").glob("*.cfg")):
        try:
            config = load_config(path)
            print(f"✅ {path.name}: {config.env.name}, {config.total_episodes} episodes")
        except ConfigError as e:
            print(f"❌ {path.name}: {e}")
            ok = False
    return ok


def check_dotenv():
    """OMAD_LOG_LEVEL from the environment or .env (optional)"""
    print("\n🔑 .env")
    from dotenv import load_dotenv

    found = load_dotenv(REPO_ROOT / ".env")
    level = os.getenv("OMAD_LOG_LEVEL")
    print(f"   .env {'loaded' if found else 'not found'}; OMAD_LOG_LEVEL = {level or 'unset (INFO)'}")
    return True


def main():
    print("🧪 OMAD environment check")
    print("=" * 40)

    checks = [check_interpreter, check_stack, check_gradients, check_agents, check_configs, check_dotenv]
    failed = []
    for check in checks:
        try:
            if not check():
                failed.append(check.__doc__)
        except Exception as e:
            print(f"❌ {check.__name__} crashed: {e}")
            failed.append(check.__doc__)

    print("\n" + "=" * 40)
    if not failed:
        print(f"🎉 {len(checks)}/{len(checks)} checks passed")
        print("   next: scripts/validation/run_all_tests.sh")
        return True
    print(f"⚠️  {len(failed)} of {len(checks)} checks failed:")
    for doc in failed:
        print(f"   - {doc}")
    print("   try: ./scripts/setup/setup_env.sh && source omad_env/bin/activate")
    return False


if __name__ == "__main__":
    sys.exit(0 if main() else 1)
