"""Prompt templates for the three LLM stages.

A template is an ordered list of sections. Exactly one section is the payload
slot; its body is replaced by the stage input when the prompt is rendered.
Stage inputs are wrapped in fixed ASCII tags (``<emr>``, ``<assertions>``,
``<edges>``, ``<pathway>``) so they are unambiguous in any locale.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import TemplateError

TASK = "task_description"
REQUIREMENTS = "output_requirements"
EXAMPLES = "examples"
COMPLETION = "completion_criteria"
PAYLOAD = "payload_slot"


@dataclass(frozen=True)
class Section:
    kind: str
    heading: str
    body: str = ""


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    sections: tuple[Section, ...]
    locale: str = "en"

    def check(self) -> None:
        n = sum(1 for s in self.sections if s.kind == PAYLOAD)
        if n != 1:
            raise TemplateError(f"template {self.name!r} has {n} payload slots, expected exactly 1")

    def render(self, payload: str) -> str:
        self.check()
        parts = []
        for s in self.sections:
            body = payload if s.kind == PAYLOAD else s.body
            parts.append(f"## {s.heading}\n{body.strip()}")
        return "\n\n".join(parts) + "\n"


def tagged(tag: str, body: str, **attrs) -> str:
    head = " ".join([tag] + [f"{k}={v}" for k, v in attrs.items()])
    return f"<{head}>\n{body}\n</{tag}>"


def enumerate_assertions(assertions: Sequence, order: Sequence[int] | None = None) -> str:
    by_id = {a.id: a for a in assertions}
    ids = list(order) if order is not None else [a.id for a in assertions]
    lines = []
    for i in ids:
        a = by_id[i]
        line = f"[{a.id}] {a.assert_}"
        if a.relative_time:
            line += f" (relative time: {a.relative_time})"
        lines.append(line)
    return "\n".join(lines)


def edge_lines(edges: Sequence[tuple[int, int]]) -> str:
    return "\n".join(f"{s} -> {d}" for s, d in edges) if edges else "(none)"


# ---------------------------------------------------------------------------
# English

_EXTRACTION_EN = PromptTemplate(
    "extraction",
    (
        Section(
            TASK,
            "Task",
            "You are a clinical documentation assistant. Decompose the electronic medical record "
            "below into atomic assertions. An atomic assertion is the smallest indivisible unit of "
            "meaning: one concrete medical fact or observation, together with when it happened "
            "relative to the current visit.",
        ),
        Section(
            REQUIREMENTS,
            "Output requirements",
            "- Output JSON Lines: one JSON object per line, nothing else.\n"
            '- Every object has exactly two keys: "assert" (the fact statement) and '
            '"relative time" (the relative timing).\n'
            "- Each object states a single fact. Split combined statements such as "
            '"headache and fever" into separate objects.\n'
            '- Keep temporal information out of "assert" and put it in "relative time" '
            '(for example "3 days ago"). Use "" when no timing is stated.\n'
            "- Keep negative findings (for example \"Patient has no fever\").\n"
            "- Only extract facts stated in the record; do not infer or add information.",
        ),
        Section(
            EXAMPLES,
            "Examples",
            "Input: The patient has had a persistent headache and fever for 3 days.\n"
            "Output:\n"
            '{"assert": "patient has a persistent headache", "relative time": "3 days ago"}\n'
            '{"assert": "patient has a persistent fever", "relative time": "3 days ago"}',
        ),
        Section(PAYLOAD, "Medical record"),
    ),
)

_NETWORK_EN = PromptTemplate(
    "network",
    (
        Section(
            TASK,
            "Task",
            "You are a clinical reasoning assistant. Using the medical record and the numbered "
            "atomic assertions extracted from it, identify the causal relationships between the "
            "assertions and build the patient's personal causal network.",
        ),
        Section(
            REQUIREMENTS,
            "Generation requirements",
            "- A link means the source assertion causes, leads to, or explains the target "
            "assertion (for example exposure -> disease, disease -> symptom, "
            "symptom -> examination, finding -> diagnosis).\n"
            "- Refer to assertions only by their bracketed numbers.\n"
            '- Output JSON Lines, one link per line: {"from": <number>, "to": <number>, '
            '"relation": "<short relationship type>"}.\n'
            "- Do not link an assertion to itself and do not repeat a link.",
        ),
        Section(
            COMPLETION,
            "Completion criteria",
            "- Every causal relationship supported by the record is present.\n"
            "- No link is included that the record does not support.\n"
            "- Assertions with no supported relationship are left unlinked.",
        ),
        Section(PAYLOAD, "Input data"),
    ),
)

_PERSONAL_EN = PromptTemplate(
    "personal_questionnaire",
    (
        Section(
            TASK,
            "Task",
            "You are preparing a pre-consultation questionnaire for one patient. Turn the "
            "patient's atomic assertions and personal causal network into clear, patient-friendly "
            "questions that let the patient confirm and elaborate on their history.",
        ),
        Section(
            REQUIREMENTS,
            "Output format and content requirements",
            "- Write one or more questions for every assertion; every assertion must be covered.\n"
            "- Prefer multiple-choice questions with at least two options; the patient may always "
            "add a free-text answer. Use free-text questions only where options make no sense.\n"
            "- Follow the order of the assertion list, which follows the causal network, so the "
            "questions flow logically.\n"
            "- Output a JSON array. Each element: "
            '{"text": str, "kind": "multiple_choice" | "free_text", "options": [str], '
            '"allows_free_text": bool, "source_assertion_ids": [int], "rationale": str}.\n'
            '- "source_assertion_ids" lists the bracketed numbers of the assertions the question covers.',
        ),
        Section(PAYLOAD, "Input data"),
    ),
)

_DISEASE_EN = PromptTemplate(
    "disease_questionnaire",
    (
        Section(
            TASK,
            "Task",
            "You are preparing a standard pre-consultation questionnaire for first-visit patients "
            "with the disease below. The input lists the representative clinical pathways found in "
            "the disease's medical records, each with its prevalence weight.",
        ),
        Section(
            REQUIREMENTS,
            "Output format and content requirements",
            "- Synthesize all pathways into one comprehensive questionnaire.\n"
            "- Prioritize by weight: cover higher-weight pathways first and in more depth.\n"
            "- Merge overlapping content so each topic is asked once, keeping a logical flow.\n"
            "- Prefer multiple-choice questions with at least two options; the patient may always "
            "add a free-text answer.\n"
            "- Output a JSON array. Each element: "
            '{"text": str, "kind": "multiple_choice" | "free_text", "options": [str], '
            '"allows_free_text": bool, "source_assertion_ids": [str], "rationale": str}.\n'
            '- "source_assertion_ids" uses the "<pathway rank>.<assertion number>" labels.',
        ),
        Section(PAYLOAD, "Input data"),
    ),
)

# ---------------------------------------------------------------------------
# Chinese

_EXTRACTION_ZH = PromptTemplate(
    "extraction",
    (
        Section(
            TASK,
            "任务描述",
            "你是一名临床文书助手。请将下面的电子病历分解为原子断言。原子断言是最小的、不可再分的语义单元："
            "一条具体的医学事实或观察，以及它相对于本次就诊发生的时间。",
        ),
        Section(
            REQUIREMENTS,
            "输出要求",
            "- 以 JSON Lines 格式输出：每行一个 JSON 对象，不要输出其他内容。\n"
            '- 每个对象只包含两个键："assert"（事实陈述）和 "relative time"（相对时间）。\n'
            "- 每个对象只陈述一个事实，将“头痛伴发热”等复合陈述拆分为多个对象。\n"
            '- 时间信息不要写在 "assert" 中，应写在 "relative time" 中（例如 "3天前"）；未提及时间时填 ""。\n'
            "- 保留阴性结果（例如“患者无发热”）。\n"
            "- 只提取病历中明确记载的事实，不要推断或补充。",
        ),
        Section(
            EXAMPLES,
            "示例",
            "输入：患者持续头痛、发热3天。\n"
            "输出：\n"
            '{"assert": "患者持续头痛", "relative time": "3天前"}\n'
            '{"assert": "患者持续发热", "relative time": "3天前"}',
        ),
        Section(PAYLOAD, "病历内容"),
    ),
    locale="zh",
)

_NETWORK_ZH = PromptTemplate(
    "network",
    (
        Section(TASK, "任务描述", "你是一名临床推理助手。请根据病历原文及从中提取的带编号原子断言，识别断言之间的因果关系，构建患者的个人因果网络。"),
        Section(
            REQUIREMENTS,
            "生成要求",
            "- 关系表示源断言导致、引起或解释目标断言（如 暴露->疾病、疾病->症状、症状->检查、检查结果->诊断）。\n"
            "- 只用方括号中的编号指代断言。\n"
            '- 以 JSON Lines 输出，每行一条关系：{"from": <编号>, "to": <编号>, "relation": "<关系类型>"}。\n'
            "- 不要将断言与自身相连，也不要重复关系。",
        ),
        Section(COMPLETION, "完成标准", "- 病历支持的所有因果关系均已列出。\n- 不包含病历不支持的关系。\n- 没有相关关系的断言保持孤立。"),
        Section(PAYLOAD, "输入数据"),
    ),
    locale="zh",
)

_PERSONAL_ZH = PromptTemplate(
    "personal_questionnaire",
    (
        Section(TASK, "任务描述", "你正在为一名患者准备诊前问卷。请将患者的原子断言和个人因果网络转化为清晰、易懂的问题，让患者确认并补充病史。"),
        Section(
            REQUIREMENTS,
            "输出格式与内容要求",
            "- 每条断言至少对应一个问题，必须覆盖全部断言。\n"
            "- 以选择题为主，至少两个选项，并允许患者自由填写；仅在选项不适用时使用填空题。\n"
            "- 按断言列表顺序（即因果网络顺序）提问，保持逻辑连贯。\n"
            '- 输出 JSON 数组，每个元素为 {"text": str, "kind": "multiple_choice" | "free_text", '
            '"options": [str], "allows_free_text": bool, "source_assertion_ids": [int], "rationale": str}。\n'
            '- "source_assertion_ids" 填写问题所覆盖断言的方括号编号。',
        ),
        Section(PAYLOAD, "输入数据"),
    ),
    locale="zh",
)

_DISEASE_ZH = PromptTemplate(
    "disease_questionnaire",
    (
        Section(TASK, "任务描述", "你正在为患有下列疾病的初诊患者准备标准诊前问卷。输入列出了该疾病病历中的代表性临床路径及其权重。"),
        Section(
            REQUIREMENTS,
            "输出格式与内容要求",
            "- 将所有路径综合为一份完整问卷。\n"
            "- 按权重排序：优先并更深入地覆盖高权重路径。\n"
            "- 合并重叠内容，每个主题只问一次，保持逻辑连贯。\n"
            "- 以选择题为主，至少两个选项，并允许患者自由填写。\n"
            '- 输出 JSON 数组，每个元素为 {"text": str, "kind": "multiple_choice" | "free_text", '
            '"options": [str], "allows_free_text": bool, "source_assertion_ids": [str], "rationale": str}。\n'
            '- "source_assertion_ids" 使用 "<路径序号>.<断言编号>" 标签。',
        ),
        Section(PAYLOAD, "输入数据"),
    ),
    locale="zh",
)

_BUILTIN = {
    ("extraction", "en"): _EXTRACTION_EN,
    ("network", "en"): _NETWORK_EN,
    ("personal_questionnaire", "en"): _PERSONAL_EN,
    ("disease_questionnaire", "en"): _DISEASE_EN,
    ("extraction", "zh"): _EXTRACTION_ZH,
    ("network", "zh"): _NETWORK_ZH,
    ("personal_questionnaire", "zh"): _PERSONAL_ZH,
    ("disease_questionnaire", "zh"): _DISEASE_ZH,
}

REPAIR_SUFFIX = {
    "en": "\n## Correction\nThe previous reply could not be used. Reply again following the output "
    "requirements exactly, with no extra commentary.\n",
    "zh": "\n## 更正\n上一次的回复无法使用。请严格按照输出要求重新回复，不要附加任何说明。\n",
}


def get_template(name: str, locale: str = "en") -> PromptTemplate:
    try:
        return _BUILTIN[(name, locale)]
    except KeyError:
        raise TemplateError(f"no built-in template {name!r} for locale {locale!r}") from None


def repair_suffix(locale: str) -> str:
    return REPAIR_SUFFIX.get(locale, REPAIR_SUFFIX["en"])
