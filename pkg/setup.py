#!/usr/bin/env python3
"""
RSLab Setup Script
Installs dependencies, prepares .env and runs a quick self-check
"""

import shutil
import subprocess
import sys
from pathlib import Path


def check_python_version():
    """Check if Python version is compatible"""
    if sys.version_info < (3, 9):
        print("❌ Python 3.9+ is required. Current version:", sys.version)
        return False
    print(f"✅ Python {sys.version.split()[0]} detected")
    return True


def install_dependencies():
    """Install Python dependencies"""
    print("\n📦 Installing Python dependencies...")

    try:
        subprocess.run([
            sys.executable, "-m", "pip", "install", "-r", "requirements.txt"
        ], check=True)
        print("✅ Dependencies installed successfully")
        return True
    except subprocess.CalledProcessError as e:
        print(f"❌ Failed to install dependencies: {e}")
        return False


def setup_environment():
    """Create .env from env.example unless one exists"""
    env_file = Path(".env")
    env_example = Path("env.example")

    if env_file.exists():
        print("⚠️ .env file already exists, keeping it")
        return True

    if env_example.exists():
        shutil.copy(env_example, env_file)
        print("✅ Created .env file from template")
        return True
    print("❌ env.example file not found")
    return False


def test_basic_functionality():
    """Import the lab, check the environment and run one tiny forward pass"""
    print("\n🧪 Testing basic functionality...")

    try:
        from config.schema import ModelConfig
        from config.settings import settings
        from datasynth.render import render_string
        from scanner.model import RobustScanner

        problems = settings.validate_config()
        for item in problems:
            print(f"   - {item}")
        print(f"✅ Environment checked ({settings.THREADS} worker threads)")

        model = RobustScanner.build(ModelConfig(c_model=16, hidden=16, embed=16), seed=0)
        texts, _ = model.decode_greedy(render_string("ab"), max_len=3)
        print(f"✅ Untrained model decodes a rendered image ({model.num_params:,} parameters): {texts[0]!r}")
        return True

    except Exception as e:
        print(f"❌ Basic functionality test failed: {e}")
        return False


def show_next_steps():
    print("\n🎉 Setup completed!")
    print("\n📋 Next Steps:")
    print("1. Generate data:")
    print("   python main.py synth --kind contextless --n 5000 --len 3..8 --charset desk20 --seed 7 --out data/rand")
    print("2. Train:")
    print("   python main.py train --variant full --vocab desk20 --data data/rand --epochs 8 --seed 1 --out runs/full")
    print("3. Evaluate and dissect:")
    print("   python main.py eval --ckpt runs/full/best.ckpt --data data/rand --out runs/full/eval")
    print("   python main.py dissect --ckpt runs/full/best.ckpt --data data/rand --l 5 --out runs/full/dissect")
    print("4. Run the test suite:")
    print("   pytest -m 'not slow'")


def main():
    """Main setup function"""
    print("🚀 RSLab Setup")
    print("=" * 50)

    if not check_python_version():
        sys.exit(1)

    if not install_dependencies():
        print("❌ Setup failed during dependency installation")
        sys.exit(1)

    if not setup_environment():
        print("❌ Setup failed during environment configuration")
        sys.exit(1)

    if not test_basic_functionality():
        print("❌ Setup completed but basic tests failed")
        sys.exit(1)

    show_next_steps()


if __name__ == "__main__":
    if len(sys.argv) > 1:
        # Invoked by a build backend (egg_info, bdist_wheel, ...): metadata lives in pyproject.toml
        from setuptools import setup
        setup()
    else:
        main()
