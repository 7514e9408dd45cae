#include <gtest/gtest.h>

#include <random>

#include "sakugaflow/codec.hpp"
#include "sakugaflow/errors.hpp"
#include "sakugaflow/raster.hpp"
#include "sakugaflow/version_tree.hpp"

using namespace sakugaflow;

TEST(Stage, OrderAndNames) {
  ASSERT_EQ(kAllStages.size(), 4u);
  EXPECT_EQ(next_stage(StageKind::Rough), StageKind::Line);
  EXPECT_EQ(next_stage(StageKind::Line), StageKind::Color);
  EXPECT_EQ(next_stage(StageKind::Color), StageKind::Finish);
  EXPECT_FALSE(next_stage(StageKind::Finish));
  EXPECT_LT(StageKind::Rough, StageKind::Finish);
  for (auto s : kAllStages) {
    EXPECT_EQ(parse_stage(stage_wire_name(s)), s);
    EXPECT_EQ(parse_stage(stage_display_name(s)), s);
  }
  EXPECT_FALSE(parse_stage("sketch"));
  EXPECT_EQ(stage_prompt_prefix(StageKind::Finish), "polished final illustration of ");
}

TEST(Digest, HexAndLeadingWord) {
  auto d = Digest::of("abc");
  EXPECT_EQ(d.hex(), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(d.leading_u64(), 0xba7816bf8f01cfeaULL);
  EXPECT_EQ(Digest::from_hex(d.hex()), d);
  EXPECT_FALSE(Digest::from_hex("BA7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"));
  EXPECT_FALSE(Digest::from_hex("abc"));
}

TEST(Base64, RoundTripsAllLengths) {
  std::mt19937 rng(3);
  for (std::size_t n = 0; n < 40; ++n) {
    std::string s(n, '\0');
    for (auto& c : s) c = static_cast<char>(rng());
    auto back = base64_decode(base64_encode(s));
    ASSERT_TRUE(back);
    EXPECT_EQ(*back, s);
  }
  EXPECT_EQ(base64_encode("hi"), "aGk=");
  EXPECT_FALSE(base64_decode("not base64!"));
}

TEST(Rgb, HexForm) {
  auto c = Rgb::from_hex("#FF8800");
  ASSERT_TRUE(c);
  EXPECT_EQ(c->hex(), "#ff8800");
  EXPECT_FALSE(Rgb::from_hex("ff8800"));
  EXPECT_FALSE(Rgb::from_hex("#ff88"));
}

TEST(GenerationParams, ClampBoundsEverything) {
  GenerationParams p;
  p.strength = 1.7;
  p.control_strength = std::nan("");
  p.palette_hint.assign(12, Rgb{1, 2, 3});
  p.clamp();
  EXPECT_EQ(p.strength, 1.0);
  EXPECT_EQ(p.control_strength, 0.0);
  EXPECT_EQ(p.palette_hint.size(), kMaxPaletteHint);
}

TEST(GenerationRequest, Violations) {
  GenerationRequest r;
  r.prompt = "rough sketch of cat";
  EXPECT_EQ(request_violation(r), "");
  r.mask = Digest::of("m");
  EXPECT_NE(request_violation(r), "");  // mask without base
  r.base_image = Digest::of("b");
  EXPECT_EQ(request_violation(r), "");  // rough inpaint carries a base
  r.mask.reset();
  EXPECT_NE(request_violation(r), "");  // rough with bare base
  r.stage = StageKind::Line;
  EXPECT_EQ(request_violation(r), "");
  r.params.strength = -0.1;
  EXPECT_NE(request_violation(r), "");
  r.params.strength = 0.5;
  r.canvas.width = 0;
  EXPECT_NE(request_violation(r), "");
}

TEST(JobState, TransitionsOnlyForward) {
  EXPECT_TRUE(job_transition_allowed(JobState::Queued, JobState::Running));
  EXPECT_TRUE(job_transition_allowed(JobState::Running, JobState::Done));
  EXPECT_TRUE(job_transition_allowed(JobState::Running, JobState::Failed));
  EXPECT_FALSE(job_transition_allowed(JobState::Queued, JobState::Done));
  EXPECT_FALSE(job_transition_allowed(JobState::Done, JobState::Running));
  EXPECT_FALSE(job_transition_allowed(JobState::Failed, JobState::Queued));
}

TEST(OwningProject, ParsesChildIds) {
  EXPECT_EQ(owning_project("0123456789abcdef-n12"), "0123456789abcdef");
  EXPECT_EQ(owning_project("0123456789abcdef-j0"), "0123456789abcdef");
  EXPECT_FALSE(owning_project("nodash"));
  EXPECT_FALSE(owning_project("-n1"));
}

TEST(ErrorCodes, HttpMapping) {
  EXPECT_EQ(http_status(ErrorCode::AlreadyPending), 409);
  EXPECT_EQ(http_status(ErrorCode::NotFound), 404);
  EXPECT_EQ(http_status(ErrorCode::EmptySelection), 400);
  EXPECT_EQ(http_status(ErrorCode::BackendUnavailable), 503);
  EXPECT_EQ(error_code_name(ErrorCode::AlreadyPending), "already_pending");
  CorruptLogError e(4, "bad crc");
  EXPECT_EQ(e.code(), ErrorCode::CorruptLog);
  EXPECT_EQ(e.last_valid_seq(), 4u);
  EXPECT_NE(std::string(e.what()).find("last valid seq 4"), std::string::npos);
}

// --- codec -------------------------------------------------------------

namespace {

std::string random_text(std::mt19937_64& rng) {
  static const char* pieces[] = {"cat", " ", "ink", ",", "é", "\"q\"", "\\", "\n", "龍", "#"};
  std::string s;
  for (int i = 0, n = static_cast<int>(rng() % 8); i < n; ++i) s += pieces[rng() % 10];
  return s;
}

template <typename T>
std::optional<T> maybe(std::mt19937_64& rng, T v) {
  return rng() % 2 ? std::optional<T>(std::move(v)) : std::nullopt;
}

GenerationParams random_params(std::mt19937_64& rng) {
  GenerationParams p;
  p.strength = static_cast<double>(rng() % 1001) / 1000.0;
  p.control_strength = static_cast<double>(rng() % 1001) / 1000.0;
  for (int i = 0, n = static_cast<int>(rng() % 4); i < n; ++i)
    p.palette_hint.push_back(Rgb{static_cast<std::uint8_t>(rng()), static_cast<std::uint8_t>(rng()),
                                 static_cast<std::uint8_t>(rng())});
  for (int i = 0, n = static_cast<int>(rng() % 3); i < n; ++i) p.style_tags.push_back(random_text(rng));
  p.control_source = maybe(rng, Canvas{static_cast<std::uint32_t>(1 + rng() % 900), 7});
  return p;
}

VersionNode random_node(std::mt19937_64& rng) {
  VersionNode n;
  n.id = "abcdef0123456789-n" + std::to_string(rng() % 50);
  n.project_id = "abcdef0123456789";
  n.parent = maybe(rng, std::string("abcdef0123456789-n0"));
  n.stage = kAllStages[rng() % 4];
  n.prompt = random_text(rng);
  n.negative_prompt = maybe(rng, random_text(rng));
  n.seed = rng();
  n.params = random_params(rng);
  n.image = maybe(rng, Digest::of(std::to_string(rng())));
  n.control_image = maybe(rng, Digest::of(std::to_string(rng())));
  n.mask = maybe(rng, Digest::of(std::to_string(rng())));
  n.status = static_cast<NodeStatus>(rng() % 4);
  n.created_at = static_cast<Timestamp>(rng() % 2'000'000'000'000);
  n.label = maybe(rng, random_text(rng));
  return n;
}

}  // namespace

TEST(Codec, RandomNodesRoundTrip) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 500; ++i) {
    auto n = random_node(rng);
    auto bytes = dump_canonical(to_document(n));
    auto back = from_document<VersionNode>(parse_document(bytes));
    ASSERT_EQ(back, n) << bytes;
    EXPECT_EQ(dump_canonical(to_document(back)), bytes);
  }
}

TEST(Codec, RandomJobsAndExchangesRoundTrip) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 300; ++i) {
    Job j;
    j.id = "abcdef0123456789-j" + std::to_string(i);
    j.node_id = "abcdef0123456789-n1";
    j.request.stage = kAllStages[rng() % 4];
    j.request.prompt = random_text(rng);
    j.request.base_image = maybe(rng, Digest::of("x"));
    j.request.seed = rng();
    j.request.params = random_params(rng);
    j.request.canvas = Canvas{static_cast<std::uint32_t>(1 + rng() % 100), 3};
    j.state = static_cast<JobState>(rng() % 4);
    j.error = maybe(rng, random_text(rng));
    j.submitted_at = 5;
    j.finished_at = maybe<Timestamp>(rng, 9);
    ASSERT_EQ(from_document<Job>(parse_document(dump_canonical(to_document(j)))), j);

    TutorExchange x;
    x.id = "abcdef0123456789-x" + std::to_string(i);
    x.node_id = j.node_id;
    x.context.project_theme = random_text(rng);
    x.context.stage = j.request.stage;
    x.context.node_prompt = random_text(rng);
    for (int k = 0, n = static_cast<int>(rng() % 6); k < n; ++k)
      x.context.recent_actions.push_back(random_text(rng));
    x.context.question = "q" + random_text(rng);
    x.answer = random_text(rng);
    x.source = rng() % 2 ? TutorSource::Offline : TutorSource::RemoteLLM;
    x.created_at = 77;
    ASSERT_EQ(from_document<TutorExchange>(parse_document(dump_canonical(to_document(x)))), x);
  }
}

TEST(Codec, CanonicalRequestMatchesOracleBytes) {
  GenerationRequest r;
  r.stage = StageKind::Rough;
  r.prompt = "rough sketch of fantasy character";
  r.seed = 42;
  r.canvas = Canvas{4, 3};
  EXPECT_EQ(canonical_request_bytes(r),
            R"({"stage":"rough","prompt":"rough sketch of fantasy character","negative_prompt":null,)"
            R"("base_image":null,"mask":null,"control_image":null,"seed":42,"params":{"strength":0.6,)"
            R"("control_strength":1.0,"palette_hint":[],"style_tags":[],"control_source":null},)"
            R"("width":4,"height":3})");
  EXPECT_EQ(request_digest(r).hex(), "f753c0e1fc80fc5fd4ff360bba55a91a19fe0a3b39524f5ac4a545d4598bb963");
}

TEST(Codec, RejectsMalformedDocuments) {
  EXPECT_THROW(from_document<VersionNode>(parse_document(R"({"id":"x"})")), Error);
  EXPECT_THROW(from_document<Canvas>(parse_document(R"({"width":"wide","height":3})")), Error);
  EXPECT_THROW(parse_document("{not json"), Error);
}

// --- raster ------------------------------------------------------------

TEST(Raster, PngRoundTripIsExact) {
  Raster r(5, 3);
  for (std::size_t i = 0; i < r.rgba.size(); ++i) r.rgba[i] = static_cast<std::uint8_t>(i * 37);
  auto png = encode_png(r);
  EXPECT_EQ(decode_png(png), r);
  EXPECT_EQ(encode_png(decode_png(png)), png);
  EXPECT_THROW(decode_png("definitely not a png"), Error);
}

TEST(Raster, ScaleNearest) {
  Raster r(2, 1);
  r.rgba = {1, 1, 1, 255, 9, 9, 9, 255};
  auto s = scale_to(r, Canvas{4, 2});
  EXPECT_EQ(s.width, 4u);
  EXPECT_EQ(s.rgba[0], 1);
  EXPECT_EQ(s.rgba[4], 1);
  EXPECT_EQ(s.rgba[8], 9);
  EXPECT_EQ(s.rgba[4 * 7], 9);
}

TEST(MaskRegion, RectanglePngRoundTrip) {
  auto m = MaskRegion::rectangle(Canvas{10, 7}, 2, 3, 4, 10);
  EXPECT_EQ(m.count(), 4u * 4u);  // clipped to the bottom edge
  EXPECT_TRUE(m.test(2, 3));
  EXPECT_FALSE(m.test(6, 3));
  EXPECT_EQ(MaskRegion::decode_png(m.encode_png()), m);
  auto bytes = m.to_bytes();
  EXPECT_EQ(bytes[3 * 10 + 2], 1);
  EXPECT_EQ(bytes[0], 0);
}

TEST(MaskRegion, GrayThreshold) {
  Raster r(2, 1);
  r.rgba = {127, 127, 127, 255, 128, 128, 128, 255};
  auto m = MaskRegion::decode_png(encode_png(r));
  EXPECT_FALSE(m.test(0, 0));
  EXPECT_TRUE(m.test(1, 0));
}

// --- version tree --------------------------------------------------------

namespace {

VersionNode make_node(const std::string& id, std::optional<std::string> parent, StageKind stage,
                      bool mask = false) {
  VersionNode n;
  n.id = id;
  n.project_id = "p";
  n.parent = std::move(parent);
  n.stage = stage;
  if (mask) n.mask = Digest::of("mask");
  return n;
}

}  // namespace

TEST(VersionTree, StageRule) {
  auto parent = make_node("p-n0", std::nullopt, StageKind::Line);
  EXPECT_FALSE(validate_child(parent, StageKind::Line, false));
  EXPECT_FALSE(validate_child(parent, StageKind::Line, true));
  EXPECT_FALSE(validate_child(parent, StageKind::Color, false));
  EXPECT_EQ(validate_child(parent, StageKind::Color, true), "mask on stage advance");
  EXPECT_EQ(validate_child(parent, StageKind::Rough, false), "backward stage");
  EXPECT_EQ(validate_child(parent, StageKind::Finish, false), "stage skip");
}

TEST(VersionTree, LineageAndCommonAncestor) {
  VersionTree t;
  t.insert(make_node("p-n0", std::nullopt, StageKind::Rough));
  t.insert(make_node("p-n1", "p-n0", StageKind::Line));
  t.insert(make_node("p-n2", "p-n1", StageKind::Color));
  t.insert(make_node("p-n3", "p-n1", StageKind::Color));
  t.insert(make_node("p-n4", "p-n3", StageKind::Color, true));
  EXPECT_EQ(t.lineage("p-n4"), (std::vector<NodeId>{"p-n0", "p-n1", "p-n3", "p-n4"}));
  EXPECT_EQ(t.lowest_common_ancestor("p-n2", "p-n4"), "p-n1");
  EXPECT_EQ(t.lowest_common_ancestor("p-n3", "p-n4"), "p-n3");
  EXPECT_EQ(t.lowest_common_ancestor("p-n2", "p-n2"), "p-n2");
  EXPECT_TRUE(t.is_ancestor("p-n0", "p-n4"));
  EXPECT_FALSE(t.is_ancestor("p-n2", "p-n4"));
  EXPECT_EQ(t.children("p-n1"), (std::vector<NodeId>{"p-n2", "p-n3"}));
  EXPECT_EQ(t.leaves(), (std::vector<NodeId>{"p-n2", "p-n4"}));
  EXPECT_EQ(t.check_invariants(), "");
}

TEST(VersionTree, RejectsBrokenInserts) {
  VersionTree t;
  t.insert(make_node("p-n0", std::nullopt, StageKind::Rough));
  EXPECT_THROW(t.insert(make_node("p-n1", std::nullopt, StageKind::Rough)), Error);  // second root
  EXPECT_THROW(t.insert(make_node("p-n0", "p-n0", StageKind::Rough)), Error);        // duplicate
  EXPECT_THROW(t.insert(make_node("p-n2", "p-n9", StageKind::Rough)), Error);        // missing parent
  try {
    t.insert(make_node("p-n3", "p-n0", StageKind::Color));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::StageViolation);
  }
  EXPECT_EQ(t.size(), 1u);
}
