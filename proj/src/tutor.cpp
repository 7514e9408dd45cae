#include "sakugaflow/tutor.hpp"

#include <httplib.h>

#include "sakugaflow/errors.hpp"
#include "sakugaflow/tutor_template.hpp"

namespace sakugaflow {

namespace {

struct Rule {
  std::string_view topic;
  std::string_view tip;
};

// Indexed by StageKind.
constexpr Rule kRules[] = {
    {"pose or composition",
     "Before any detail, judge the pose or composition: squint at the thumbnail and ask whether "
     "the silhouette reads. If it does not, regenerate with a new seed or inpaint the limbs "
     "that tangle."},
    {"line thickness",
     "Vary line thickness with intent: heavier lines where forms overlap or turn away from the "
     "light, thinner lines for interior detail. Uniform weight flattens the figure."},
    {"warm vs. cool contrast",
     "Think in warm vs. cool contrast: push shadows cooler and lit planes warmer, or the reverse, "
     "and keep one temperature dominant. Branch here to compare two palettes side by side."},
    {"lighting consistency",
     "Where is the light source? Every highlight and cast shadow should agree with it. Check "
     "the face, hands and folds before adding effects."},
};

std::string replace_all(std::string text, std::string_view key, std::string_view value) {
  std::size_t pos = 0;
  while ((pos = text.find(key, pos)) != std::string::npos) {
    text.replace(pos, key.size(), value);
    pos += value.size();
  }
  return text;
}

std::string fill(const TutorContext& ctx, std::size_t first_action) {
  std::string actions;
  if (first_action >= ctx.recent_actions.size()) actions = "- (none)";
  for (std::size_t i = first_action; i < ctx.recent_actions.size(); ++i) {
    if (!actions.empty()) actions += '\n';
    actions += "- " + ctx.recent_actions[i];
  }
  // The question goes in last so placeholders inside user text stay literal.
  std::string out(generated::kTutorTemplate);
  out = replace_all(std::move(out), "{{stage}}", stage_display_name(ctx.stage));
  out = replace_all(std::move(out), "{{theme}}", ctx.project_theme);
  out = replace_all(std::move(out), "{{prompt}}", ctx.node_prompt);
  out = replace_all(std::move(out), "{{actions}}", actions);
  auto q = out.find("{{question}}");
  if (q != std::string::npos) out.replace(q, 12, ctx.question);
  return out;
}

}  // namespace

const std::string_view kTutorPersona =
    "You are a drawing tutor for a novice illustrator working through rough sketch, line art, "
    "coloring and finishing stages. Give one or two short, concrete art-theory tips for the "
    "current stage and end with a reflective question. Do not write prompts for the learner.";

TutorContext assemble_context(const ProjectState& state, const NodeId& node_id,
                              std::string_view question, std::size_t window) {
  const auto& node = state.tree.at(node_id);
  std::string q(question);
  if (q.find_first_not_of(" \t\r\n") == std::string::npos)
    throw Error(ErrorCode::InvalidArgument, "question must not be empty");
  TutorContext ctx;
  ctx.project_theme = state.project.theme;
  ctx.stage = node.stage;
  ctx.node_prompt = node.prompt;
  const auto& all = state.actions;
  const std::size_t start = all.size() > window ? all.size() - window : 0;
  ctx.recent_actions.assign(all.begin() + static_cast<std::ptrdiff_t>(start), all.end());
  ctx.question = std::move(q);
  return ctx;
}

std::string_view stage_topic(StageKind stage) { return kRules[stage_index(stage)].topic; }

std::string offline_answer(const TutorContext& ctx) {
  const auto& rule = kRules[stage_index(ctx.stage)];
  return std::string(stage_display_name(ctx.stage)) + " tip (" + std::string(rule.topic) + "): " +
         std::string(rule.tip);
}

std::string render_context(const TutorContext& ctx, RenderLimits limits) {
  const std::size_t n = ctx.recent_actions.size();
  std::size_t first = n > limits.max_actions ? n - limits.max_actions : 0;
  std::string out = fill(ctx, first);
  while (out.size() > limits.max_chars && first < n) out = fill(ctx, ++first);
  return out;
}

RemoteTutor::RemoteTutor(std::string endpoint, std::chrono::milliseconds timeout, RenderLimits limits)
    : endpoint_(std::move(endpoint)), timeout_(timeout), limits_(limits) {
  while (!endpoint_.empty() && endpoint_.back() == '/') endpoint_.pop_back();
  if (endpoint_.empty()) throw Error(ErrorCode::InvalidArgument, "tutor endpoint is empty");
}

std::string RemoteTutor::answer(const TutorContext& ctx) const {
  auto scheme_end = endpoint_.find("://");
  auto path_start = endpoint_.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  const std::string host = endpoint_.substr(0, path_start);
  const std::string prefix = path_start == std::string::npos ? "" : endpoint_.substr(path_start);

  httplib::Client client(host);
  client.set_connection_timeout(std::chrono::seconds(5));
  client.set_read_timeout(timeout_);

  nlohmann::ordered_json body;
  body["system"] = kTutorPersona;
  body["messages"] = nlohmann::ordered_json::array(
      {{{"role", "user"}, {"content", render_context(ctx, limits_)}}});
  auto res = client.Post(prefix + "/v1/chat", body.dump(), "application/json");
  if (!res)
    throw Error(ErrorCode::BackendUnavailable, "tutor transport error: " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw Error(ErrorCode::BackendUnavailable, "tutor returned " + std::to_string(res->status));
  try {
    auto doc = nlohmann::json::parse(res->body);
    auto content = doc.at("content").get<std::string>();
    if (content.empty()) throw Error(ErrorCode::BackendUnavailable, "tutor returned an empty answer");
    return content;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BackendUnavailable, std::string("malformed tutor response: ") + e.what());
  }
}

TutorService::TutorService(Engine& engine, TutorOptions options)
    : engine_(engine), options_(std::move(options)) {
  if (options_.endpoint && !options_.endpoint->empty())
    remote_.emplace(*options_.endpoint, options_.timeout, options_.limits);
}

TutorExchange TutorService::ask(const NodeId& node_id, std::string_view question) {
  auto state = engine_.state_of(node_id);
  TutorExchange ex;
  ex.node_id = node_id;
  ex.context = assemble_context(*state, node_id, question, options_.window);
  if (remote_) {
    try {
      ex.answer = remote_->answer(ex.context);
      ex.source = TutorSource::RemoteLLM;
    } catch (const Error&) {
      if (!options_.fallback) throw;
    }
  }
  if (ex.answer.empty()) {
    ex.answer = offline_answer(ex.context);
    ex.source = TutorSource::Offline;
  }
  return engine_.record_exchange(std::move(ex));
}

}  // namespace sakugaflow
