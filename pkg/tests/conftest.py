"""測試共用的模型文字與 fixture。"""

import pytest

from core.parser import parse_system

# 五個行程、兩種同步動作的樹：a-scope 有三個，b-scope 只有根
FIVE_LEAF_MODEL = """
process P1 { initial 0; 0 -(a, 1.0)-> 1; 1 -(b, 1.0)-> 0; }
process P2 { initial 0; 0 -(a, 1.0)-> 1; 1 -(b, 1.0)-> 0; }
process P3 { initial 0; 0 -(b, 1.0)-> 1; 1 -(b, 1.0)-> 0; }
process P4 { initial 0; 0 -(a, 1.0)-> 1; 1 -(b, 1.0)-> 0; }
process P5 { initial 0; 0 -(a, 1.0)-> 1; 1 -(b, 1.0)-> 0; }
system : (P1 ||{a} P2) ||{b} (P3 ||{b} (P4 ||{a} P5));
"""

# P1 移動，P2 的 a 自迴圈經由不同步 a 的節點參與；P3 的自迴圈因為
# P4 ||{b,c} P5 無法配合而被排除
NESTED_SYNC_MODEL = """
process P1 { states 1, 2; initial 1; 1 -(a, 1.0)-> 2; }
process P2 { initial 1; 1 -(a, 1.0)-> 1; }
process P3 { initial 3; 3 -(a, 1.0)-> 3; }
process P4 { initial 1; }
process P5 { initial 2; }
system : P1 ||{a, b, c} (P2 ||{c} (P3 ||{a} (P4 ||{b, c} P5)));
"""

# P1、P3 移動，P4 以 must 同步的自迴圈參與；P2 只在涉入集合中
INVOLVED_MODEL = """
process P1 { initial s1; s1 -(a, 1.0)-> s1'; }
process P2 { initial s2; s2 -(b, 1.0)-> s2'; s2' -(a, 1.0)-> s2''; }
process P3 { initial s3; s3 -(a, 1.0)-> s3'; }
process P4 { initial s4; s4 -(a, 1.0)-> s4; }
system : (P1 || P2) ||{a} (P3 ||{a} P4);
"""

# 同一條平面轉移有兩個推導：P 分別與 Q、R 的自迴圈同步
TWO_DERIVATION_MODEL = """
process P { initial s1; s1 -(a, 2.0)-> s1'; }
process Q { initial s2; s2 -(a, 3.0)-> s2; }
process R { initial s3; s3 -(a, 5.0)-> s3; }
system : P ||{a} (Q || R);
"""

# P 以 c 移動，R/S/T/U 各有 c 自迴圈
SELFLOOP_COMBINATION_MODEL = """
process P { initial p0; p0 -(c, 1.0)-> p1; }
process Q { initial q0; q0 -(d, 1.0)-> q1; }
process R { initial r0; r0 -(c, 1.0)-> r0; }
process S { initial s0; s0 -(c, 1.0)-> s0; }
process T { initial t0; t0 -(c, 1.0)-> t0; }
process U { initial u0; u0 -(c, 1.0)-> u0; }
system : ((P || Q) ||{c} (R || S)) ||{c} (T || U);
"""

# 兩個互不同步的行程；Q 只會切換狀態
INTERLEAVED_MODEL = """
process P { initial s0; s0 -(a, 1.0)-> s1; s1 -(b, 1.0)-> s0; }
process Q { initial q0; q0 -(d, 1.0)-> q1; q1 -(d, 1.0)-> q0; }
system : P || Q;
"""

# 與 INTERLEAVED_MODEL 相同，但 Q 在 q0 也能執行 a，根節點無法改為同步 a
CONFLICTING_MODEL = """
process P { initial s0; s0 -(a, 1.0)-> s1; s1 -(b, 1.0)-> s0; }
process Q { initial q0; q0 -(a, 1.0)-> q1; q1 -(d, 1.0)-> q0; }
system : P || Q;
"""

SINGLE_PROCESS_MODEL = """
process P {
  states s0, s1;
  initial s0;
  s0 -(a, 1.0)-> s1;   // 修正係數加在這條
  s1 -(b, 2.0)-> s0;
}
system : P;
"""


@pytest.fixture
def five_leaf():
    return parse_system(FIVE_LEAF_MODEL)


@pytest.fixture
def nested_sync():
    return parse_system(NESTED_SYNC_MODEL)


@pytest.fixture
def involved_model():
    return parse_system(INVOLVED_MODEL)


@pytest.fixture
def two_derivations():
    return parse_system(TWO_DERIVATION_MODEL)


@pytest.fixture
def selfloop_combinations():
    return parse_system(SELFLOOP_COMBINATION_MODEL)


@pytest.fixture
def interleaved():
    return parse_system(INTERLEAVED_MODEL)


@pytest.fixture
def conflicting():
    return parse_system(CONFLICTING_MODEL)


@pytest.fixture
def single_process():
    return parse_system(SINGLE_PROCESS_MODEL)
