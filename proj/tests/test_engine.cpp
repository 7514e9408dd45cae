#include <gtest/gtest.h>

#include <thread>

#include "sakugaflow/engine.hpp"
#include "sakugaflow/errors.hpp"
#include "support.hpp"

using namespace sakugaflow;
using namespace sakugaflow::testing;

namespace {

constexpr Canvas kSmall{32, 32};

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::Internal;
}

// rough -> line -> color, all completed; returns the three node ids.
std::vector<NodeId> three_stages(Engine& e, const Project& p) {
  generate_now(e, p.root_node);
  auto line = e.advance_stage(p.root_node, "clean contour lines");
  generate_now(e, line.id);
  auto color = e.advance_stage(line.id, "warm palette");
  generate_now(e, color.id);
  return {p.root_node, line.id, color.id};
}

}  // namespace

TEST(PromptMerge, AppliesTemplates) {
  EXPECT_EQ(merge_prompt("rough sketch of knight", StageKind::Rough, StageKind::Line, "bold ink"),
            "clean line art of knight, bold ink");
  EXPECT_EQ(merge_prompt("clean line art of knight, bold ink", StageKind::Line, StageKind::Color, " "),
            "flat colored illustration of knight, bold ink");
  EXPECT_EQ(merge_prompt("custom text", StageKind::Color, StageKind::Finish, ""),
            "polished final illustration of custom text");
}

TEST(TokenDiff, LongestCommonSubsequence) {
  auto d = diff_tokens("flat colored illustration of knight, warm palette",
                       "flat colored illustration of knight, cool blue palette");
  EXPECT_EQ(d.removed, std::vector<std::string>{"warm"});
  EXPECT_EQ(d.added, (std::vector<std::string>{"cool", "blue"}));
  auto same = diff_tokens("a b", "a  b");
  EXPECT_TRUE(same.removed.empty());
  EXPECT_TRUE(same.added.empty());
}

TEST(Engine, CreateProject) {
  Engine e(memory_options(), std::make_shared<MockBackend>());
  auto p = e.create_project("  fantasy character ", kSmall, 42);
  EXPECT_EQ(p.id.size(), 16u);
  EXPECT_EQ(p.theme, "fantasy character");
  EXPECT_EQ(p.active_node, p.root_node);
  auto root = e.node(p.root_node);
  EXPECT_EQ(root.prompt, "rough sketch of fantasy character");
  EXPECT_EQ(root.seed, 42u);
  EXPECT_EQ(root.status, NodeStatus::Draft);
  EXPECT_EQ(e.events(p.id).size(), 1u);
  EXPECT_EQ(code_of([&] { e.create_project("   "); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([&] { e.create_project("x", Canvas{0, 5}); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([&] { e.node("ffffffffffffffff-n0"); }), ErrorCode::NotFound);
}

TEST(Engine, SeededIdsAreReproducible) {
  Engine a(memory_options(5), std::make_shared<MockBackend>());
  Engine b(memory_options(5), std::make_shared<MockBackend>());
  EXPECT_EQ(a.create_project("x").id, b.create_project("x").id);
}

TEST(Engine, GenerateCompletesWithMockImage) {
  Engine e(memory_options(), std::make_shared<MockBackend>());
  auto p = e.create_project("fantasy character", kSmall, 42);
  auto job = e.generate(p.root_node);
  EXPECT_EQ(job.id, p.id + "-j0");
  auto done = e.wait(job.id);
  EXPECT_EQ(done.state, JobState::Done);
  auto node = e.node(p.root_node);
  ASSERT_EQ(node.status, NodeStatus::Completed);
  GenerationRequest expected = job.request;
  EXPECT_EQ(node.image, ImageBlob::from_raster(mock_generate_raster(expected, nullptr, nullptr)).digest);
  EXPECT_TRUE(e.blob(*node.image));
  EXPECT_EQ(code_of([&] { e.generate(p.root_node); }), ErrorCode::AlreadyCompleted);
}

TEST(Engine, SecondGenerateWhilePendingIsRejected) {
  auto gate = std::make_shared<GatedBackend>();
  Engine e(memory_options(), gate);
  auto p = e.create_project("x", kSmall);
  auto job = e.generate(p.root_node);
  EXPECT_EQ(e.node(p.root_node).status, NodeStatus::Pending);
  EXPECT_EQ(code_of([&] { e.generate(p.root_node); }), ErrorCode::AlreadyPending);
  EXPECT_EQ(code_of([&] { e.advance_stage(p.root_node, ""); }), ErrorCode::NotCompleted);
  gate->release();
  EXPECT_EQ(e.wait(job.id).state, JobState::Done);
}

TEST(Engine, AdvanceCarriesImageForward) {
  Engine e(memory_options(), std::make_shared<MockBackend>());
  auto p = e.create_project("knight", kSmall, 9);
  EXPECT_EQ(code_of([&] { e.advance_stage(p.root_node, "x"); }), ErrorCode::NotCompleted);
  auto ids = three_stages(e, p);
  auto color = e.node(ids[2]);
  EXPECT_EQ(color.stage, StageKind::Color);
  EXPECT_EQ(color.prompt, "flat colored illustration of knight, clean contour lines, warm palette");
  EXPECT_EQ(color.seed, 9u);
  EXPECT_EQ(e.state(p.id)->project.active_node, ids[2]);
  auto job = e.state(p.id)->jobs.back();
  EXPECT_EQ(job.request.base_image, e.node(ids[1]).image);

  auto finish = e.advance_stage(ids[2], "rim light", 77);
  EXPECT_EQ(finish.seed, 77u);
  generate_now(e, finish.id);
  EXPECT_EQ(code_of([&] { e.advance_stage(finish.id, ""); }), ErrorCode::NoNextStage);
}

TEST(Engine, RegenerateUsesOverridesAndBaseRule) {
  Engine e(memory_options(), std::make_shared<MockBackend>());
  auto p = e.create_project("knight", kSmall, 9);
  auto ids = three_stages(e, p);

  auto alt_root = e.regenerate(ids[0], {});
  EXPECT_EQ(alt_root.stage, StageKind::Rough);
  EXPECT_NE(alt_root.seed, 9u);
  EXPECT_EQ(e.state(p.id)->project.active_node, alt_root.id);
  EXPECT_FALSE(build_request(*e.state(p.id), alt_root).base_image);

  RegenerateOverrides o;
  o.prompt = "knight, cool blue palette";
  o.seed = 5;
  GenerationParams params;
  params.strength = 0.9;
  o.params = params;
  auto alt_color = e.regenerate(ids[2], o);
  EXPECT_EQ(alt_color.prompt, "flat colored illustration of knight, cool blue palette");
  EXPECT_EQ(alt_color.seed, 5u);
  EXPECT_EQ(alt_color.params.strength, 0.9);
  EXPECT_EQ(alt_color.parent, ids[2]);
  // Same-stage revision starts from what its parent started from: the line image.
  EXPECT_EQ(build_request(*e.state(p.id), alt_color).base_image, e.node(ids[1]).image);
  EXPECT_EQ(generate_now(e, alt_color.id).status, NodeStatus::Completed);
}

TEST(Engine, InpaintPreservesUnselectedPixels) {
  Engine e(memory_options(), std::make_shared<MockBackend>());
  auto p = e.create_project("knight", kSmall, 9);
  auto ids = three_stages(e, p);
  EXPECT_EQ(code_of([&] { e.inpaint(ids[2], MaskRegion(32, 32), "x"); }), ErrorCode::EmptySelection);
  EXPECT_EQ(code_of([&] { e.inpaint(ids[2], MaskRegion::rectangle(Canvas{16, 16}, 0, 0, 4, 4), "x"); }),
            ErrorCode::DimensionMismatch);

  auto mask = MaskRegion::rectangle(kSmall, 3, 5, 10, 7);
  auto child = e.inpaint(ids[2], mask, "red scarf");
  EXPECT_EQ(child.stage, StageKind::Color);
  EXPECT_EQ(child.prompt, "flat colored illustration of knight, clean contour lines, warm palette, red scarf");
  EXPECT_EQ(child.mask, Digest::of(mask.encode_png()));
  generate_now(e, child.id);

  auto before = decode_png(*e.blob(*e.node(ids[2]).image));
  auto after = decode_png(*e.blob(*e.node(child.id).image));
  auto report = e.compare(ids[2], child.id);
  EXPECT_GT(report.differing_pixels, 0u);
  EXPECT_LE(report.differing_pixels, mask.count());
  for (std::uint32_t y = 0; y < 32; ++y)
    for (std::uint32_t x = 0; x < 32; ++x)
      if (!mask.test(x, y)) {
        for (int c = 0; c < 4; ++c)
          ASSERT_EQ(before.rgba[4 * (y * 32 + x) + c], after.rgba[4 * (y * 32 + x) + c]);
      }
}

TEST(Engine, ControlImageOnDraftsOnly) {
  Engine e(memory_options(), std::make_shared<MockBackend>());
  auto p = e.create_project("knight", kSmall);
  Raster scribble(64, 48);
  for (std::size_t i = 0; i < scribble.rgba.size(); i += 4) scribble.rgba[i + 3] = 255;
  auto node = e.attach_control_image(p.root_node, encode_png(scribble));
  ASSERT_TRUE(node.control_image);
  EXPECT_EQ(node.params.control_source, (Canvas{64, 48}));
  auto stored = decode_png(*e.blob(*node.control_image));
  EXPECT_EQ(stored.size(), kSmall);
  EXPECT_EQ(code_of([&] { e.attach_control_image(p.root_node, "junk"); }), ErrorCode::UndecodableImage);

  auto job = e.generate(p.root_node);
  EXPECT_EQ(job.request.control_image, node.control_image);
  e.wait(job.id);
  EXPECT_EQ(code_of([&] { e.attach_control_image(p.root_node, encode_png(scribble)); }), ErrorCode::NotDraft);

  // Advancing drops the control image.
  auto line = e.advance_stage(p.root_node, "");
  EXPECT_FALSE(line.control_image);
  EXPECT_FALSE(line.params.control_source);
}

TEST(Engine, ActivateAndForeignNodes) {
  Engine e(memory_options(), std::make_shared<MockBackend>());
  auto p = e.create_project("knight", kSmall);
  auto q = e.create_project("dragon", kSmall);
  const auto events = e.events(p.id).size();
  e.activate(p.id, p.root_node);  // already active: no event
  EXPECT_EQ(e.events(p.id).size(), events);
  EXPECT_EQ(code_of([&] { e.activate(p.id, q.root_node); }), ErrorCode::ForeignNode);
  EXPECT_EQ(code_of([&] { e.activate(p.id, p.id + "-n9"); }), ErrorCode::NotFound);
  generate_now(e, p.root_node);
  generate_now(e, q.root_node);
  EXPECT_EQ(code_of([&] { e.compare(p.root_node, q.root_node); }), ErrorCode::ForeignNode);

  auto line = e.advance_stage(p.root_node, "");
  e.activate(p.id, p.root_node);
  EXPECT_EQ(e.state(p.id)->project.active_node, p.root_node);
  EXPECT_EQ(e.events(p.id).back().kind, EventKind::Activated);
  EXPECT_EQ(code_of([&] { e.compare(p.root_node, line.id); }), ErrorCode::NotCompleted);
}

TEST(Engine, CompareBranches) {
  Engine e(memory_options(), std::make_shared<MockBackend>());
  auto p = e.create_project("knight", kSmall, 3);
  auto ids = three_stages(e, p);
  auto cool = e.advance_stage(ids[1], "cool palette", 4);
  generate_now(e, cool.id);
  auto r = e.compare(ids[2], cool.id);
  EXPECT_EQ(r.lowest_common_ancestor, ids[1]);
  EXPECT_EQ(r.total_pixels, kSmall.pixel_count());
  EXPECT_GT(r.differing_pixels, 0u);
  EXPECT_EQ(r.prompt_diff.removed, std::vector<std::string>{"warm"});
  EXPECT_EQ(r.prompt_diff.added, std::vector<std::string>{"cool"});
  EXPECT_EQ(r.params_diff.size(), 1u);
  EXPECT_EQ(r.params_diff["seed"], Document::array({3, 4}));
  auto self = e.compare(cool.id, cool.id);
  EXPECT_EQ(self.differing_pixels, 0u);
  EXPECT_EQ(self.lowest_common_ancestor, cool.id);
  auto doc = to_document(r);
  EXPECT_EQ(doc["lowest_common_ancestor"], ids[1]);
}

TEST(Engine, FailedGenerationCanBeRetried) {
  Engine e(memory_options(), std::make_shared<FailingBackend>("gpu unplugged"));
  auto p = e.create_project("knight", kSmall);
  auto job = e.wait(e.generate(p.root_node).id);
  EXPECT_EQ(job.state, JobState::Failed);
  EXPECT_EQ(job.error, "gpu unplugged");
  EXPECT_EQ(e.node(p.root_node).status, NodeStatus::Failed);
  auto retry = e.wait(e.generate(p.root_node).id);
  EXPECT_EQ(retry.id, p.id + "-j1");
  EXPECT_EQ(e.events(p.id).back().kind, EventKind::NodeFailed);
}

TEST(Engine, LabelsAndExchanges) {
  Engine e(memory_options(), std::make_shared<MockBackend>());
  auto p = e.create_project("knight", kSmall);
  EXPECT_EQ(e.set_label(p.root_node, " first ").label, "first");
  TutorExchange x;
  x.node_id = p.root_node;
  x.context.stage = StageKind::Line;
  x.context.question = "q";
  EXPECT_EQ(code_of([&] { e.record_exchange(x); }), ErrorCode::InvalidArgument);
  x.context.stage = StageKind::Rough;
  auto saved = e.record_exchange(x);
  EXPECT_EQ(saved.id, p.id + "-x0");
  EXPECT_EQ(e.state(p.id)->exchanges.size(), 1u);
}

TEST(Engine, CacheServesRepeatedRequests) {
  Engine e(memory_options(), std::make_shared<MockBackend>());
  auto p = e.create_project("knight", kSmall, 1);
  generate_now(e, p.root_node);
  RegenerateOverrides same_seed;
  same_seed.seed = 1;
  auto twin = e.regenerate(p.root_node, same_seed);
  generate_now(e, twin.id);
  EXPECT_EQ(e.node(twin.id).image, e.node(p.root_node).image);
  EXPECT_EQ(e.cache()->hits(), 1u);

  EngineOptions no_cache = memory_options();
  no_cache.cache_enabled = false;
  Engine plain(no_cache, std::make_shared<MockBackend>());
  EXPECT_EQ(plain.cache(), nullptr);
}

TEST(Engine, HookSeesEveryEventInOrder) {
  std::vector<std::uint64_t> seen;
  std::mutex mu;
  EngineOptions o = memory_options();
  o.on_event = [&](const EventRecord& r, const ProjectState& s) {
    std::lock_guard lock(mu);
    EXPECT_EQ(s.last_seq, r.seq);
    seen.push_back(r.seq);
  };
  Engine e(o, std::make_shared<MockBackend>());
  auto p = e.create_project("knight", kSmall);
  three_stages(e, p);
  std::lock_guard lock(mu);
  ASSERT_EQ(seen.size(), e.events(p.id).size());
  for (std::size_t i = 0; i < seen.size(); ++i) EXPECT_EQ(seen[i], i);
}

TEST(Engine, WaitEventsWakesOnNewRecords) {
  auto gate = std::make_shared<GatedBackend>();
  Engine e(memory_options(), gate);
  auto p = e.create_project("knight", kSmall);
  e.generate(p.root_node);
  const auto from = e.events(p.id).size();
  std::thread releaser([&] {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    gate->release();
  });
  std::vector<EventRecord> got;
  while (got.empty() || got.back().kind != EventKind::NodeCompleted) {
    auto batch = e.wait_events(p.id, from + got.size(), std::chrono::seconds(5));
    ASSERT_FALSE(batch.empty());
    got.insert(got.end(), batch.begin(), batch.end());
  }
  releaser.join();
  EXPECT_EQ(got.front().seq, from);
  EXPECT_TRUE(e.wait_events(p.id, e.events(p.id).size(), std::chrono::milliseconds(10)).empty());
}

TEST(Engine, ProjectsRunConcurrentlyButEachInOrder) {
  EngineOptions o = memory_options();
  o.parallel_jobs = 3;
  Engine e(o, std::make_shared<MockBackend>());
  std::vector<Project> projects;
  for (int i = 0; i < 5; ++i) projects.push_back(e.create_project("p" + std::to_string(i), kSmall));
  for (auto& p : projects) {
    generate_now(e, p.root_node);
    for (int k = 0; k < 4; ++k) e.generate(e.regenerate(p.root_node, {}).id);
  }
  e.wait_idle();
  for (auto& p : projects) {
    auto s = e.state(p.id);
    for (const auto& n : s->tree.nodes()) EXPECT_EQ(n.status, NodeStatus::Completed);
    // At most one running job per project: starts and finishes alternate.
    int running = 0;
    for (const auto& r : e.events(p.id)) {
      if (r.kind == EventKind::JobStarted) ++running;
      if (r.kind == EventKind::NodeCompleted || r.kind == EventKind::NodeFailed) --running;
      ASSERT_LE(running, 1);
    }
  }
}

// --- persistence ------------------------------------------------------------

TEST(EnginePersistence, RestartRestoresEveryProject) {
  TempDir dir;
  EngineOptions o = memory_options();
  o.data_dir = dir.path();
  std::shared_ptr<const ProjectState> live;
  ProjectId pid;
  {
    Engine e(o, std::make_shared<MockBackend>());
    auto p = e.create_project("knight", kSmall, 2);
    pid = p.id;
    three_stages(e, p);
    e.set_label(p.root_node, "start");
    live = e.state(p.id);
  }
  Engine again(o, std::make_shared<MockBackend>());
  EXPECT_TRUE(again.load_errors().empty());
  ASSERT_TRUE(again.has_project(pid));
  EXPECT_EQ(*again.state(pid), *live);
  auto color = live->tree.nodes().back();
  EXPECT_TRUE(again.blob(pid, *color.image));
  // Work continues with dense ids.
  EXPECT_EQ(again.advance_stage(color.id, "").id, pid + "-n3");
}

TEST(EnginePersistence, SnapshotsAreWrittenAndUsed) {
  TempDir dir;
  EngineOptions o = memory_options();
  o.data_dir = dir.path();
  ProjectId pid;
  {
    Engine e(o, std::make_shared<MockBackend>());
    auto p = e.create_project("knight", kSmall);
    pid = p.id;
    for (int i = 0; i < 300; ++i) e.set_label(p.root_node, "l" + std::to_string(i));
  }
  ProjectPaths paths{dir.path() / pid};
  auto snap = read_snapshot(paths.snapshot());
  ASSERT_TRUE(snap);
  EXPECT_EQ(snap->first, 255u);
  auto fast = replay(paths, true);
  auto slow = replay(paths, false);
  EXPECT_EQ(fast.snapshot_seq, 255u);
  EXPECT_FALSE(slow.snapshot_seq);
  EXPECT_EQ(fast.state, slow.state);
}

TEST(EnginePersistence, InterruptedJobsAreRecovered) {
  TempDir dir;
  auto gate = std::make_shared<GatedBackend>();
  EngineOptions o = memory_options();
  o.data_dir = dir.path() / "live";
  o.parallel_jobs = 1;
  Engine e(o, gate);
  auto a = e.create_project("a", kSmall);
  auto b = e.create_project("b", kSmall);
  e.generate(a.root_node);
  e.generate(b.root_node);
  while (gate->started() == 0) std::this_thread::sleep_for(std::chrono::milliseconds(1));
  // One job is running and the other is queued; freeze the store as a crash would.
  std::filesystem::copy(dir.path() / "live", dir.path() / "crashed", std::filesystem::copy_options::recursive);
  gate->release();
  e.wait_idle();

  EngineOptions o2 = o;
  o2.data_dir = dir.path() / "crashed";
  Engine recovered(o2, std::make_shared<MockBackend>());
  recovered.wait_idle();
  std::map<NodeStatus, int> outcomes;
  for (const auto& id : {a.id, b.id}) outcomes[recovered.state(id)->tree.at(id + "-n0").status]++;
  EXPECT_EQ(outcomes[NodeStatus::Failed], 1);
  EXPECT_EQ(outcomes[NodeStatus::Completed], 1);
  for (const auto& id : {a.id, b.id}) {
    auto s = recovered.state(id);
    if (s->tree.at(id + "-n0").status == NodeStatus::Failed) {
      EXPECT_EQ(s->jobs[0].error, "interrupted before completion");
    }
  }
}

TEST(EnginePersistence, CorruptProjectIsReportedNotFatal) {
  TempDir dir;
  EngineOptions o = memory_options();
  o.data_dir = dir.path();
  ProjectId good, bad;
  {
    Engine e(o, std::make_shared<MockBackend>());
    good = e.create_project("good", kSmall).id;
    bad = e.create_project("bad", kSmall).id;
    e.set_label(bad + "-n0", "x");
  }
  auto log = dir.path() / bad / "events.log";
  std::filesystem::resize_file(log, std::filesystem::file_size(log) - 3);
  Engine e(o, std::make_shared<MockBackend>());
  EXPECT_TRUE(e.has_project(good));
  EXPECT_FALSE(e.has_project(bad));
  ASSERT_EQ(e.load_errors().count(bad), 1u);
  EXPECT_NE(e.load_errors().at(bad).find("last valid seq 0"), std::string::npos);
}
