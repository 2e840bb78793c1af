"""SPA 模型、修正係數檔與平面轉移系統匯出檔的文字格式。

模型格式::

    // 註解到行尾
    process P {
      states s0, s1;              // 可省略，省略時依出現順序收集
      initial s0;
      s0 -(a, 2.0)-> s1;
      s1 -(b, 1.5)-> s1;          // 允許自迴圈
    }
    system : (P ||{a} (Q || R));

``||`` 後的 ``{...}`` 為同步集合，省略時為空集合。同一層括號內的多個 ``||``
一律轉成向右巢狀的二元樹，例如 ``A || B || C`` 即 ``A || (B || C)``。

係數檔每行一筆 ``(s1,...,sn) -a-> (s1',...,sn') : f``，狀態依 LNR 順序。
"""

import math
from dataclasses import dataclass

import regex

from core.model import (
    Composition,
    Leaf,
    LocalTransition,
    ModelError,
    ProcessNode,
    SequentialProcess,
    SpaSystem,
    node_expression,
)
from core.semantics import FlatTS, GlobalState, TransitionKey
from core.utils import logger

ModificationMap = dict[TransitionKey, float]

_NAME = r"[\p{L}\p{N}_][\p{L}\p{N}_.']*"

_TOKEN_PATTERN = regex.compile(
    rf"""
    (?P<COMMENT>//[^\n]*)
  | (?P<WS>\s+)
  | (?P<ARROW_OPEN>-\()
  | (?P<ARROW_CLOSE>\)->)
  | (?P<LABEL_ARROW>-{_NAME}->)
  | (?P<PAR>\|\|)
  | (?P<NUMBER>[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?(?![\p{{L}}\p{{N}}_.']))
  | (?P<NAME>{_NAME})
  | (?P<PUNCT>[{{}}();,:])
    """,
    regex.VERBOSE,
)


class ParseError(ValueError):
    """文字格式錯誤，附帶出錯位置（行與欄皆從 1 起算）。"""

    def __init__(self, line: int, column: int, message: str):
        self.line = line
        self.column = column
        self.message = message
        super().__init__(f"第 {line} 行第 {column} 欄: {message}")


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    column: int


def _fail(line: int, column: int, message: str, suggestion: str) -> ParseError:
    error = ParseError(line, column, f"{message}\n建議：{suggestion}")
    logger.error(str(error))
    return error


def tokenize(text: str) -> list[Token]:
    """把文字切成 token，略過空白與 ``//`` 註解。

    Raises:
        ParseError: 遇到無法辨識的字元時
    """
    tokens: list[Token] = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        match = _TOKEN_PATTERN.match(text, pos)
        if match is None:
            raise _fail(
                line,
                pos - line_start + 1,
                f"無法辨識的字元 {text[pos]!r}",
                "請檢查是否有拼錯的箭頭或多餘的符號",
            )
        kind = match.lastgroup
        value = match.group()
        if kind not in ("WS", "COMMENT"):
            assert kind is not None
            tokens.append(Token(kind, value, line, pos - line_start + 1))
        newlines = value.count("\n")
        if newlines:
            line += newlines
            line_start = pos + value.rindex("\n") + 1
        pos = match.end()
    return tokens


class _TokenStream:
    """逐一取用 token 的游標，仿照遞迴下降剖析器的 consume/expect 介面。"""

    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.index = 0
        lines = text.split("\n")
        self._eof_line = len(lines)
        self._eof_column = len(lines[-1]) + 1

    def peek(self, offset: int = 0) -> Token | None:
        i = self.index + offset
        return self.tokens[i] if i < len(self.tokens) else None

    def at_end(self) -> bool:
        return self.index >= len(self.tokens)

    def consume(self) -> Token:
        token = self.peek()
        if token is None:
            raise _fail(
                self._eof_line,
                self._eof_column,
                "檔案意外結束",
                "請確認括號與分號是否成對",
            )
        self.index += 1
        return token

    def check(self, kind: str, text: str | None = None) -> bool:
        token = self.peek()
        return (
            token is not None
            and token.kind == kind
            and (text is None or token.text == text)
        )

    def expect(self, kind: str, text: str | None = None, what: str = "") -> Token:
        token = self.consume()
        if token.kind != kind or (text is not None and token.text != text):
            expected = what or (text if text is not None else kind)
            raise _fail(
                token.line,
                token.column,
                f"預期 {expected}，實際為 {token.text!r}",
                "請對照模型格式說明檢查語法",
            )
        return token

    def expect_word(self, what: str) -> Token:
        """名稱或數字形式的識別字（例如狀態 ``1``）。"""
        token = self.consume()
        if token.kind not in ("NAME", "NUMBER") or token.text[0] in "+-":
            raise _fail(
                token.line,
                token.column,
                f"預期{what}，實際為 {token.text!r}",
                "名稱只能由字母、數字、底線、點與單引號組成",
            )
        return token

    def fail_here(self, message: str, suggestion: str) -> ParseError:
        token = self.peek()
        if token is None:
            return _fail(self._eof_line, self._eof_column, message, suggestion)
        return _fail(token.line, token.column, message, suggestion)


@dataclass
class _ProcessDraft:
    name: str
    token: Token
    initial: str | None = None
    declared_states: list[str] | None = None
    transitions: list[tuple[LocalTransition, Token]] | None = None


def _parse_process(stream: _TokenStream) -> _ProcessDraft:
    stream.expect("NAME", "process")
    name_token = stream.expect_word("行程名稱")
    draft = _ProcessDraft(name=name_token.text, token=name_token, transitions=[])
    assert draft.transitions is not None
    stream.expect("PUNCT", "{")

    while not stream.check("PUNCT", "}"):
        head = stream.peek()
        follower = stream.peek(1)
        is_transition = follower is not None and follower.kind == "ARROW_OPEN"

        if head is not None and head.text == "initial" and not is_transition:
            stream.consume()
            state = stream.expect_word("初始狀態")
            if draft.initial is not None:
                raise _fail(
                    head.line,
                    head.column,
                    f"行程 {draft.name} 重複指定初始狀態",
                    "每個行程只能有一行 initial",
                )
            draft.initial = state.text
            stream.expect("PUNCT", ";")
        elif head is not None and head.text == "states" and not is_transition:
            stream.consume()
            states = [stream.expect_word("狀態名稱").text]
            while stream.check("PUNCT", ","):
                stream.consume()
                states.append(stream.expect_word("狀態名稱").text)
            draft.declared_states = states
            stream.expect("PUNCT", ";")
        else:
            source = stream.expect_word("來源狀態")
            stream.expect("ARROW_OPEN", what="-(")
            action = stream.expect_word("動作名稱")
            stream.expect("PUNCT", ",")
            rate_token = stream.expect("NUMBER", what="速率")
            stream.expect("ARROW_CLOSE", what=")->")
            target = stream.expect_word("目標狀態")
            stream.expect("PUNCT", ";")

            rate = float(rate_token.text)
            if not (math.isfinite(rate) and rate > 0):
                raise _fail(
                    rate_token.line,
                    rate_token.column,
                    f"速率必須為正數，實際為 {rate_token.text}",
                    "Markov 速率必須大於 0",
                )
            draft.transitions.append(
                (LocalTransition(source.text, action.text, rate, target.text), source)
            )

    stream.expect("PUNCT", "}")
    return draft


def _build_process(draft: _ProcessDraft) -> SequentialProcess:
    assert draft.transitions is not None
    if draft.initial is None:
        raise _fail(
            draft.token.line,
            draft.token.column,
            f"行程 {draft.name} 沒有 initial 宣告",
            "請加入 `initial <state>;`",
        )

    if draft.declared_states is not None:
        states = list(draft.declared_states)
        declared = set(states)
        if draft.initial not in declared:
            raise _fail(
                draft.token.line,
                draft.token.column,
                f"行程 {draft.name} 的初始狀態 {draft.initial} 未宣告",
                "請將它加入 states 清單",
            )
        for tr, token in draft.transitions:
            for state in (tr.source, tr.target):
                if state not in declared:
                    raise _fail(
                        token.line,
                        token.column,
                        f"行程 {draft.name} 使用了未宣告的狀態 {state}",
                        "請將它加入 states 清單",
                    )
    else:
        states = [draft.initial]
        for tr, _ in draft.transitions:
            for state in (tr.source, tr.target):
                if state not in states:
                    states.append(state)

    try:
        return SequentialProcess(
            name=draft.name,
            states=tuple(states),
            initial=draft.initial,
            transitions=tuple(tr for tr, _ in draft.transitions),
        )
    except ModelError as e:
        raise ParseError(draft.token.line, draft.token.column, str(e)) from e


def _parse_chain(
    stream: _TokenStream, processes: dict[str, SequentialProcess], used: set[str]
) -> ProcessNode:
    operands = [_parse_primary(stream, processes, used)]
    syncs: list[frozenset[str]] = []
    while stream.check("PAR"):
        stream.consume()
        sync: set[str] = set()
        if stream.check("PUNCT", "{"):
            stream.consume()
            if not stream.check("PUNCT", "}"):
                sync.add(stream.expect_word("動作名稱").text)
                while stream.check("PUNCT", ","):
                    stream.consume()
                    sync.add(stream.expect_word("動作名稱").text)
            stream.expect("PUNCT", "}")
        syncs.append(frozenset(sync))
        operands.append(_parse_primary(stream, processes, used))

    # 向右巢狀：A op1 B op2 C → A op1 (B op2 C)
    node = operands[-1]
    for operand, sync in zip(reversed(operands[:-1]), reversed(syncs)):
        node = Composition(operand, node, sync)
    return node


def _parse_primary(
    stream: _TokenStream, processes: dict[str, SequentialProcess], used: set[str]
) -> ProcessNode:
    if stream.check("PUNCT", "("):
        stream.consume()
        node = _parse_chain(stream, processes, used)
        stream.expect("PUNCT", ")")
        return node

    token = stream.expect_word("行程名稱或 (")
    if token.text not in processes:
        raise _fail(
            token.line,
            token.column,
            f"未定義的行程 {token.text}",
            f"已定義的行程: {sorted(processes)}",
        )
    if token.text in used:
        raise _fail(
            token.line,
            token.column,
            f"行程 {token.text} 在系統運算式中出現超過一次",
            "每個循序行程只能作為一個葉節點；請複製並改名",
        )
    used.add(token.text)
    return Leaf(processes[token.text])


def parse_system(text: str) -> SpaSystem:
    """剖析模型文字並建立 SpaSystem。

    Args:
        text: 模型內容

    Returns:
        結構良好的 SpaSystem

    Raises:
        ParseError: 語法錯誤，或未定義的行程、未宣告的狀態、非正速率等語意錯誤
    """
    stream = _TokenStream(text)
    processes: dict[str, SequentialProcess] = {}
    root: ProcessNode | None = None

    while not stream.at_end():
        head = stream.peek()
        assert head is not None
        if head.kind == "NAME" and head.text == "process":
            draft = _parse_process(stream)
            if draft.name in processes:
                raise _fail(
                    draft.token.line,
                    draft.token.column,
                    f"行程 {draft.name} 重複定義",
                    "每個行程名稱只能定義一次",
                )
            processes[draft.name] = _build_process(draft)
        elif head.kind == "NAME" and head.text == "system":
            if root is not None:
                raise _fail(
                    head.line, head.column, "重複的 system 宣告", "檔案中只能有一個 system"
                )
            stream.consume()
            stream.expect("PUNCT", ":")
            used: set[str] = set()
            root = _parse_chain(stream, processes, used)
            stream.expect("PUNCT", ";")
            unused = sorted(set(processes) - used)
            if unused:
                logger.warning(f"以下行程已定義但未出現在 system 中: {unused}")
        else:
            raise stream.fail_here(
                f"預期 process 或 system，實際為 {head.text!r}",
                "頂層只能出現行程定義與一個 system 宣告",
            )

    if root is None:
        raise stream.fail_here("缺少 system 宣告", "請在檔案末尾加入 `system : <expr>;`")

    sys = SpaSystem(root)
    logger.debug(f"剖析完成：{sys.size} 個循序行程")
    return sys


def _format_rate(rate: float) -> str:
    return repr(float(rate))


def serialize_system(sys: SpaSystem) -> str:
    """把系統寫回模型文字；parse_system 可還原出結構相同的系統。"""
    blocks: list[str] = []
    for process in sys.leaves:
        lines = [f"process {process.name} {{"]
        lines.append(f"  states {', '.join(process.states)};")
        lines.append(f"  initial {process.initial};")
        for tr in process.transitions:
            lines.append(
                f"  {tr.source} -({tr.action}, {_format_rate(tr.rate)})-> {tr.target};"
            )
        lines.append("}")
        blocks.append("\n".join(lines))
    blocks.append(f"system : {node_expression(sys.root)};")
    return "\n\n".join(blocks) + "\n"


def format_state(state: GlobalState) -> str:
    return "(" + ",".join(state) + ")"


def format_key(key: TransitionKey) -> str:
    source, action, target = key
    return f"{format_state(source)} -{action}-> {format_state(target)}"


def _parse_tuple(stream: _TokenStream) -> tuple[GlobalState, Token]:
    start = stream.expect("PUNCT", "(")
    parts = [stream.expect_word("區域狀態").text]
    while stream.check("PUNCT", ","):
        stream.consume()
        parts.append(stream.expect_word("區域狀態").text)
    stream.expect("PUNCT", ")")
    return tuple(parts), start


def _parse_keyed_line(stream: _TokenStream) -> tuple[TransitionKey, float, Token]:
    """剖析 ``(src) -a-> (tgt) : value``，回傳鍵、數值與行首 token。"""
    source, start = _parse_tuple(stream)
    arrow = stream.expect("LABEL_ARROW", what="-<action>->")
    action = arrow.text[1:-2]
    target, _ = _parse_tuple(stream)
    stream.expect("PUNCT", ":")
    value_token = stream.expect("NUMBER", what="數值")
    return (source, action, target), float(value_token.text), start


def parse_transition_key(text: str) -> TransitionKey:
    """剖析單一轉移鍵 ``(s1,...,sn) -a-> (s1',...,sn')``。"""
    stream = _TokenStream(text)
    source, _ = _parse_tuple(stream)
    arrow = stream.expect("LABEL_ARROW", what="-<action>->")
    target, _ = _parse_tuple(stream)
    if not stream.at_end():
        raise stream.fail_here("轉移鍵後面有多餘的內容", "格式為 (s1,...,sn) -a-> (s1',...,sn')")
    return source, arrow.text[1:-2], target


def parse_factors(text: str, flat: FlatTS) -> ModificationMap:
    """剖析修正係數檔。

    Args:
        text: 係數檔內容，每行一筆
        flat: 對應的平面轉移系統

    Returns:
        轉移鍵到係數的對應；未列出的轉移係數為 1

    Raises:
        ParseError: 轉移不存在、係數非正、重複的鍵，或指向全域自迴圈
    """
    stream = _TokenStream(text)
    factors: ModificationMap = {}
    width = len(flat.initial)
    while not stream.at_end():
        key, factor, start = _parse_keyed_line(stream)
        source, _, target = key
        if len(source) != width or len(target) != width:
            raise _fail(
                start.line,
                start.column,
                f"狀態向量長度應為 {width}，實際為 {len(source)} / {len(target)}",
                "請依 LNR 順序列出每個循序行程的區域狀態",
            )
        if key not in flat.index:
            raise _fail(
                start.line,
                start.column,
                f"平面轉移系統中不存在轉移 {format_key(key)}",
                "請用 flatten 子命令匯出轉移清單後再撰寫係數檔",
            )
        if source == target:
            raise _fail(
                start.line,
                start.column,
                f"轉移 {format_key(key)} 是全域自迴圈，不能指定修正係數",
                "修正係數只能加在至少有一個行程移動的轉移上",
            )
        if not (math.isfinite(factor) and factor > 0):
            raise _fail(
                start.line,
                start.column,
                f"係數必須為正數，實際為 {factor}",
                "修正係數是乘在原速率上的正實數",
            )
        if key in factors:
            raise _fail(
                start.line,
                start.column,
                f"轉移 {format_key(key)} 重複出現",
                "每個轉移只能指定一次係數",
            )
        factors[key] = factor

    logger.debug(f"讀入 {len(factors)} 筆修正係數")
    return factors


def serialize_factors(factors: ModificationMap) -> str:
    lines = [
        f"{format_key(key)} : {factor:.17g}" for key, factor in sorted(factors.items())
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def _expect_count(stream: _TokenStream, what: str) -> tuple[int, Token]:
    token = stream.expect("NUMBER", what=what)
    try:
        value = int(token.text)
    except ValueError:
        value = -1
    if value < 0:
        raise _fail(
            token.line,
            token.column,
            f"{what}必須是非負整數，實際為 {token.text!r}",
            "請使用 export_flat 產生的檔案，不要手動修改標頭",
        )
    return value, token


def parse_flat(text: str) -> tuple[int, dict[TransitionKey, float]]:
    """讀回 export_flat 的輸出。

    Returns:
        (狀態數, 轉移鍵 → 速率)

    Raises:
        ParseError: 標頭缺漏或不是非負整數、轉移數與標頭不符或轉移重複
    """
    stream = _TokenStream(text)
    stream.expect("NAME", "STATES")
    states, _ = _expect_count(stream, "狀態數")
    stream.expect("NAME", "TRANSITIONS")
    count, count_token = _expect_count(stream, "轉移數")

    rates: dict[TransitionKey, float] = {}
    while not stream.at_end():
        key, rate, start = _parse_keyed_line(stream)
        if key in rates:
            raise _fail(
                start.line, start.column, f"轉移 {format_key(key)} 重複", "匯出檔不應重複"
            )
        rates[key] = rate

    if len(rates) != count:
        raise _fail(
            count_token.line,
            count_token.column,
            f"標頭宣告 {count} 筆轉移，實際讀到 {len(rates)} 筆",
            "檔案可能被截斷",
        )
    return states, rates


__all__ = [
    "ModificationMap",
    "ParseError",
    "Token",
    "tokenize",
    "parse_system",
    "serialize_system",
    "parse_transition_key",
    "parse_factors",
    "serialize_factors",
    "parse_flat",
    "format_state",
    "format_key",
]
