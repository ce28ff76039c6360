from pathlib import Path
rfshake_dir = Path(__file__).parent.parent
configs_dir = rfshake_dir / "configs"
