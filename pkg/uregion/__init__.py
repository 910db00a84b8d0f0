"""
Uncertainty Region Toolkit

このパッケージには以下のモジュールが含まれています：
- pipeline: 射影の組・分散領域・サンプリング・波束・光学実験の計算
- services: 受け入れ検証スイート
- config: TOML / 環境変数による既定値の読み込み
- cli: コマンドライン入口
"""

__version__ = "0.1.0"
