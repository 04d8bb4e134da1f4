#include <gtest/gtest.h>

#include <httplib.h>
#include <json.hpp>

#include <fingerfab/clock.hpp>
#include <fingerfab/print_protocol.hpp>

using namespace fingerfab;

namespace {

constexpr const char* kKey = "test-key";

struct Rig {
  VirtualClock clock;
  MockPrinterServer server;
  PrintClient client;

  explicit Rig(MockPrinterConfig cfg = {})
      : server(std::move(cfg), clock, kKey), client({server.base_url(), kKey, 1.0}, clock) {}
};

}  // namespace

TEST(MockPrinter, DurationTableMatchesByPrefix) {
  VirtualClock clock;
  MockPrinter p(MockPrinterConfig{}, clock);
  EXPECT_DOUBLE_EQ(p.duration_for("key_F1.gcode"), 337.0);
  EXPECT_DOUBLE_EQ(p.duration_for("ethernet_F3.gcode"), 676.0);
  EXPECT_DOUBLE_EQ(p.duration_for("battery"), 592.0);
  EXPECT_DOUBLE_EQ(p.duration_for("other.gcode"), 600.0);
}

TEST(MockPrinter, InProcessLifecycle) {
  VirtualClock clock;
  MockPrinter p(MockPrinterConfig{}, clock);
  EXPECT_FALSE(p.upload_gcode("key.gcode", "G1").overwritten);
  EXPECT_TRUE(p.upload_gcode("key.gcode", "G1 X1").overwritten);
  EXPECT_EQ(*p.file_body("key.gcode"), "G1 X1");
  p.start_job("key.gcode");
  clock.advance(100);
  auto s = p.get_job_state();
  EXPECT_EQ(s.phase, PrinterPhase::printing);
  EXPECT_NEAR(s.progress, 100.0 / 337.0, 1e-12);
  EXPECT_NEAR(*s.seconds_remaining, 237.0, 1e-9);
  clock.advance(237);
  s = p.get_job_state();
  EXPECT_EQ(s.phase, PrinterPhase::operational);
  EXPECT_DOUBLE_EQ(s.progress, 1.0);
}

TEST(PrintProtocol, UploadListOverwriteDownload) {
  Rig rig;
  auto r1 = rig.client.upload_gcode("key.gcode", "G28 X Y\n");
  EXPECT_EQ(r1.name, "key.gcode");
  EXPECT_EQ(r1.size, 8u);
  EXPECT_FALSE(r1.overwritten);
  EXPECT_TRUE(rig.client.upload_gcode("key.gcode", "G1 X2\n").overwritten);
  rig.client.upload_gcode("battery.gcode", "G1\n");
  EXPECT_EQ(rig.client.list_files(), (std::vector<std::string>{"battery.gcode", "key.gcode"}));
  EXPECT_EQ(rig.client.download("key.gcode"), "G1 X2\n");
  EXPECT_THROW(rig.client.download("nope.gcode"), NotFoundError);
}

TEST(PrintProtocol, RawBodyUpload) {
  Rig rig;
  httplib::Client cli(rig.server.base_url());
  httplib::Headers h{{"X-Api-Key", kKey}};
  auto res = cli.Post("/api/files/local?name=raw.gcode", h, "G1 X5\n", "text/plain");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 201);
  EXPECT_EQ(rig.client.download("raw.gcode"), "G1 X5\n");
}

TEST(PrintProtocol, StartBusyAndProgress) {
  Rig rig;
  rig.client.upload_gcode("key.gcode", "G1\n");
  EXPECT_THROW(rig.client.start_job("missing.gcode"), NotFoundError);
  const auto receipt = rig.client.start_job("key.gcode");
  EXPECT_DOUBLE_EQ(receipt.started_at, 0.0);
  EXPECT_THROW(rig.client.start_job("key.gcode"), BusyError);
  double last = -1.0;
  for (int t = 0; t < 40; ++t) {
    const auto s = rig.client.get_job_state();
    EXPECT_GE(s.progress, last);
    last = s.progress;
    if (s.phase != PrinterPhase::printing) break;
    EXPECT_EQ(*s.file_name, "key.gcode");
    rig.clock.advance(10);
  }
  const auto done = rig.client.get_job_state();
  EXPECT_EQ(done.phase, PrinterPhase::operational);
  EXPECT_DOUBLE_EQ(done.progress, 1.0);
}

TEST(PrintProtocol, AuthRejected) {
  Rig rig;
  PrintClient bad({rig.server.base_url(), "wrong", 1.0}, rig.clock);
  EXPECT_THROW(bad.get_job_state(), AuthError);
  EXPECT_THROW(bad.upload_gcode("a.gcode", "x"), AuthError);
  PrintClient none({rig.server.base_url(), "", 1.0}, rig.clock);
  EXPECT_THROW(none.list_files(), AuthError);
}

TEST(PrintProtocol, AwaitCompletionOnVirtualClock) {
  Rig rig;
  rig.client.upload_gcode("ethernet_F1.gcode", "G1\n");
  rig.client.start_job("ethernet_F1.gcode");
  const auto s = rig.client.await_completion();
  EXPECT_EQ(s.phase, PrinterPhase::operational);
  EXPECT_GE(rig.clock.now(), 676.0);
  EXPECT_LT(rig.clock.now(), 676.0 + 1.0 + 1e-9);
}

TEST(PrintProtocol, PollTimeout) {
  Rig rig;
  rig.client.upload_gcode("battery.gcode", "G1\n");
  rig.client.start_job("battery.gcode");
  EXPECT_THROW(rig.client.await_completion(100.0), PollTimeout);
}

TEST(PrintProtocol, InjectedFaultFreezesProgressUntilCancel) {
  MockPrinterConfig cfg;
  cfg.faults = {{"bad", 0.4}};
  Rig rig(cfg);
  rig.client.upload_gcode("bad_part.gcode", "G1\n");
  rig.client.start_job("bad_part.gcode");
  const auto s = rig.client.await_completion();
  EXPECT_EQ(s.phase, PrinterPhase::error);
  EXPECT_DOUBLE_EQ(s.progress, 0.4);
  rig.clock.advance(1000);
  EXPECT_EQ(rig.client.get_job_state().phase, PrinterPhase::error);
  EXPECT_THROW(rig.client.start_job("bad_part.gcode"), BusyError);
  rig.client.cancel_job();
  EXPECT_EQ(rig.client.get_job_state().phase, PrinterPhase::operational);
}

TEST(PrintProtocol, MalformedJobCommand) {
  Rig rig;
  httplib::Client cli(rig.server.base_url());
  httplib::Headers h{{"X-Api-Key", kKey}};
  auto res = cli.Post("/api/job", h, "{not json", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
  res = cli.Post("/api/job", h, R"({"command":"dance"})", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
}

TEST(PrintProtocol, JobStateWireFormat) {
  Rig rig;
  httplib::Client cli(rig.server.base_url());
  auto res = cli.Get("/api/job", httplib::Headers{{"X-Api-Key", kKey}});
  ASSERT_TRUE(res);
  const auto j = nlohmann::json::parse(res->body);
  EXPECT_EQ(j.at("phase"), "operational");
  EXPECT_TRUE(j.contains("progress"));
  EXPECT_TRUE(j.contains("seconds_remaining"));
  EXPECT_TRUE(j.contains("file_name"));
}

TEST(PrintProtocol, UnreachableServerRaisesNetworkErrorAfterBackoff) {
  VirtualClock clock;
  int port = 0;
  {
    MockPrinterServer tmp(MockPrinterConfig{}, clock, kKey);
    port = tmp.port();
  }
  PrintClient client({"http://127.0.0.1:" + std::to_string(port), kKey, 1.0}, clock, RetryPolicy{2, 0.5});
  EXPECT_THROW(client.get_job_state(), NetworkError);
  EXPECT_GT(clock.now(), 0.0);
}

TEST(PrintProtocol, PortInUseIsReported) {
  VirtualClock clock;
  MockPrinterServer a(MockPrinterConfig{}, clock, kKey);
  EXPECT_THROW(MockPrinterServer(MockPrinterConfig{}, clock, kKey, a.port()), PrintProtocolError);
}
