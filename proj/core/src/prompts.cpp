#include "clost/prompts.hpp"

#include <fstream>
#include <sstream>

#include "clost/error.hpp"

namespace clost::prompts {
namespace {

struct BuiltinText {
  const char* name;
  const char* en;
  const char* zh;
};

// Defaults shipped with the toolkit; the assets/ directory carries the same
// texts in editable form.
const BuiltinText kBuiltins[] = {
    {"seed_instruction",
     "What is the punchline of this response, and why is it funny?",
     "这个回答的笑点是什么？它为什么好笑？"},

    {"rule_initial",
     "Rewrite the given instruction into a more complex version. Add one "
     "extra constraint or one extra reasoning step, keep the original topic, "
     "and keep the instruction answerable in a short paragraph.",
     "将给定指令改写为更复杂的版本。增加一个额外的约束或一个额外的推理步骤，"
     "保持原始话题不变，并保证指令仍可用一小段话回答。"},

    {"rule_complex",
     "Rewrite the given instruction into a substantially more complex "
     "version. Require background knowledge, ask for the social or "
     "psychological mechanism behind the humor, demand multi-step reasoning "
     "from setup to punchline, and keep the instruction answerable in a "
     "short paragraph.",
     "将给定指令改写为明显更复杂的版本。要求补充背景知识，追问幽默背后的社会"
     "或心理机制，要求从铺垫到笑点的多步推理，并保证指令仍可用一小段话回答。"},

    {"rewriter_system",
     "You rewrite instructions about humorous conversations and then answer "
     "them. Follow the rewriting rule you are given exactly. Reply with "
     "plain text only.",
     "你负责改写关于幽默对话的指令并回答它们。严格遵循给定的改写规则。"
     "只用纯文本回复。"},

    {"imaginator_system",
     "You invent new humorous conversations. Given an instruction and its "
     "answer, imagine one new question-answer pair in the same spirit. Reply "
     "with exactly one JSON object {\"question\": str, \"answer\": str} and "
     "nothing else.",
     "你负责想象新的幽默对话。给定一条指令及其回答，想象一个风格一致的新"
     "问答对。只回复一个 JSON 对象 {\"question\": str, \"answer\": str}。"},

    {"analyst_system",
     "You compare two humorous conversations and an instruction's evolution. "
     "Decide whether the conversations share the same viewpoint or "
     "punchline, and whether the evolved instruction is more complex than "
     "the seed. When the instruction failed to become more complex, supply a "
     "stricter rewriting rule. Reply with exactly one JSON object "
     "{\"same_punchline\": bool, \"more_complex\": bool, \"new_rule\": "
     "str|null} and nothing else.",
     "你负责比较两段幽默对话以及指令的演化。判断两段对话是否表达相同的观点或"
     "笑点，以及演化后的指令是否比初始指令更复杂。若指令未能变得更复杂，请给"
     "出更严格的改写规则。只回复一个 JSON 对象 {\"same_punchline\": bool, "
     "\"more_complex\": bool, \"new_rule\": str|null}。"},

    {"teacher_system",
     "You are a teacher who knows the ideal humorous answer to a question. "
     "The student answered incorrectly. Point out what is wrong and give a "
     "short hint that moves the student toward the ideal answer without "
     "revealing it verbatim.",
     "你是一位知道理想幽默回答的老师。学生回答错误。请指出问题所在，并给出"
     "简短提示，引导学生接近理想回答，但不要直接透露答案。"},

    {"student_system",
     "You are a student answering a question with a witty, humorous "
     "response. Use the teacher's feedback when present. Reply with the "
     "answer only.",
     "你是一名学生，需要用机智幽默的回答回应问题。若有老师的反馈请加以利用。"
     "只回复答案本身。"},

    {"teacher_instruction",
     "Give the student feedback on their humorous answer.",
     "就学生的幽默回答给出反馈。"},

    {"student_instruction",
     "Answer the question with a witty, humorous response, using any teacher "
     "feedback provided.",
     "结合老师的反馈（如有），用机智幽默的回答回应问题。"},

    {"alignment_system",
     "You judge whether a student's answer aligns with a reference answer in "
     "terms of logic and humor. Reply with exactly one JSON object "
     "{\"aligned\": bool} and nothing else.",
     "你负责判断学生的回答是否在逻辑和幽默上与参考回答一致。只回复一个 JSON "
     "对象 {\"aligned\": bool}。"},

    {"expert_system",
     "You are an expert in causal reasoning about humor. Given a question "
     "and an answer, extract the entities involved and explain the causal "
     "chain that makes the answer work. Reply with exactly one JSON object "
     "{\"question_entities\": [str], \"answer_entities\": [str], "
     "\"bridge_entities\": [str], \"causal_chain\": str} and nothing else. "
     "bridge_entities are the entities that connect the question to the "
     "answer.",
     "你是幽默因果推理方面的专家。给定一个问题和一个回答，请抽取其中的实体，"
     "并解释使回答成立的因果链。只回复一个 JSON 对象 {\"question_entities\": "
     "[str], \"answer_entities\": [str], \"bridge_entities\": [str], "
     "\"causal_chain\": str}。bridge_entities 是连接问题与回答的实体。"},

    {"choice_template",
     "Below is a question and {m} candidate responses. Select the single "
     "most humorous response. Answer with exactly one letter.\n\n"
     "Question: {question}\nOptions:\n{options}\nAnswer:",
     "下面是一个问题和 {m} 个候选回答。请选出最幽默的一个回答，只回复一个"
     "字母。\n\n问题：{question}\n选项：\n{options}\n答案："},

    {"choice_template_standalone",
     "Below are {m} standalone texts. Judge the texts themselves and select "
     "the single most humorous one. Answer with exactly one letter.\n\n"
     "Options:\n{options}\nAnswer:",
     "下面是 {m} 段独立文本。请根据文本本身选出最幽默的一段，只回复一个"
     "字母。\n\n选项：\n{options}\n答案："},

    {"rank_template",
     "Below is a question and {m} candidate responses. Order the responses "
     "from funniest to least funny. Answer with the option letters separated "
     "by ' > '.\n\nQuestion: {question}\nOptions:\n{options}\nAnswer:",
     "下面是一个问题和 {m} 个候选回答。请按从最幽默到最不幽默排序，用 ' > ' "
     "分隔选项字母作答。\n\n问题：{question}\n选项：\n{options}\n答案："},

    {"rewrite_template",
     "Transform the following non-humorous statement into a humorous "
     "expression while keeping its topic.",
     "将下面这个不幽默的表述改写成幽默的表达，同时保持其主题不变。"},

    {"judge_pairwise_template",
     "Below is a question and 2 candidate responses. Select the single most "
     "humorous response. Answer with exactly one letter.\n\n"
     "Question: {question}\nOptions:\n{options}\nAnswer:",
     "下面是一个问题和 2 个候选回答。请选出最幽默的一个回答，只回复一个"
     "字母。\n\n问题：{question}\n选项：\n{options}\n答案："},

    {"generate_1",
     "Give an unexpected, witty response to the following prompt. One or two "
     "sentences.\n\nPrompt: {question}",
     "请对下面的题目给出一个出人意料的机智回应，一到两句话。\n\n题目："
     "{question}"},

    {"generate_2",
     "Reply to the prompt with a short deadpan joke that twists its "
     "premise.\n\nPrompt: {question}",
     "请用一句冷幽默回应下面的题目，要求反转其前提。\n\n题目：{question}"},

    {"generate_3",
     "Answer the prompt with wordplay or a pun. Keep it under 30 "
     "words.\n\nPrompt: {question}",
     "请用双关或文字游戏回答下面的题目，不超过 30 个字。\n\n题目：{question}"},

    {"generate_4",
     "Respond to the prompt from an absurd but internally consistent "
     "perspective.\n\nPrompt: {question}",
     "请从一个荒诞但自洽的视角回应下面的题目。\n\n题目：{question}"},
};

std::string key_of(std::string_view name, corpus::Language lang) {
  return corpus::to_string(lang) + "/" + std::string(name);
}

}  // namespace

PromptAssets PromptAssets::builtin() {
  PromptAssets assets;
  for (const auto& b : kBuiltins) {
    assets.set(b.name, corpus::Language::en, b.en);
    assets.set(b.name, corpus::Language::zh, b.zh);
  }
  return assets;
}

PromptAssets PromptAssets::load_dir(const std::filesystem::path& dir) {
  PromptAssets assets = builtin();
  if (!std::filesystem::is_directory(dir)) {
    throw ValidationError("prompt asset directory not found: " + dir.string());
  }
  for (const corpus::Language lang :
       {corpus::Language::en, corpus::Language::zh}) {
    const auto lang_dir = dir / corpus::to_string(lang);
    if (!std::filesystem::is_directory(lang_dir)) continue;
    for (const auto& entry : std::filesystem::directory_iterator(lang_dir)) {
      if (!entry.is_regular_file() || entry.path().extension() != ".txt") {
        continue;
      }
      std::ifstream in(entry.path());
      std::ostringstream text;
      text << in.rdbuf();
      std::string value = text.str();
      while (!value.empty() && (value.back() == '\n' || value.back() == '\r')) {
        value.pop_back();
      }
      assets.set(entry.path().stem().string(), lang, std::move(value));
    }
  }
  return assets;
}

const std::string& PromptAssets::get(std::string_view name,
                                     corpus::Language lang) const {
  const auto it = texts_.find(key_of(name, lang));
  if (it == texts_.end()) {
    throw ValidationError("missing prompt asset '" + std::string(name) +
                          "' for language " + corpus::to_string(lang));
  }
  return it->second;
}

bool PromptAssets::has(std::string_view name, corpus::Language lang) const {
  return texts_.contains(key_of(name, lang));
}

void PromptAssets::set(std::string_view name, corpus::Language lang,
                       std::string text) {
  texts_[key_of(name, lang)] = std::move(text);
}

std::vector<std::string> PromptAssets::generation_prompts(
    corpus::Language lang) const {
  std::vector<std::string> prompts;
  for (int i = 1;; ++i) {
    const std::string name = "generate_" + std::to_string(i);
    if (!has(name, lang)) break;
    prompts.push_back(get(name, lang));
  }
  return prompts;
}

std::string render(
    std::string_view tmpl,
    std::initializer_list<std::pair<std::string_view, std::string_view>>
        subs) {
  std::string out(tmpl);
  for (const auto& [key, value] : subs) {
    const std::string token = "{" + std::string(key) + "}";
    std::size_t pos = 0;
    while ((pos = out.find(token, pos)) != std::string::npos) {
      out.replace(pos, token.size(), value);
      pos += value.size();
    }
  }
  return out;
}

}  // namespace clost::prompts
