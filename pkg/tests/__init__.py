"""測試套件。"""
