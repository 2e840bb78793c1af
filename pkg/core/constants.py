"""專案級常數定義。

Schema 定義位於 core.schemas；環境變數解析位於 core.utils.config。
"""

# 平面化狀態數上限（可由環境變數覆寫）
STATE_BUDGET_ENV = "SPALIFT_STATE_BUDGET"
DEFAULT_STATE_BUDGET = 10**7

# 方程式求解
DEFAULT_SOLVER_TOLERANCE = 1e-9
DEFAULT_RESTARTS = 64
DEFAULT_SEED = 0
DEFAULT_MAX_NFEV = 2000

# 修復結果驗證的相對誤差容忍度
VERIFY_TOLERANCE = 1e-6

# 報告 JSON 版本
REPORT_SCHEMA_VERSION = 1

# 平面轉移系統匯出時的有效位數（17 位可無損還原 float64）
RATE_SIGNIFICANT_DIGITS = 17

# 新增自迴圈的暫定速率（乘法單位元）
PLACEHOLDER_SELFLOOP_RATE = 1.0

# PRISM polling 基準模型參數
POLLING_MU = 1.0
POLLING_GAMMA = 200.0
