#include <doctest.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "stance/annotation.h"
#include "stance/commands.h"
#include "stance/errors.h"
#include "stance/fsutil.h"
#include "stance/service.h"
#include "support/testing.h"

using namespace stance;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

CommandContext prepared(const fs::path& dir) {
  CommandContext ctx;
  ctx.config.data_dir = dir;
  ctx.config.annotation.annotators = {"ann1", "ann2"};
  ctx.config.annotation.third = "ann3";
  ctx.config.annotation.overlap = 4;
  ctx.config.service.workers = 1;
  ctx.backends.sleep = [](std::chrono::milliseconds) {};
  run_ingest_file(ctx, testing::fixtures() / "mainstream.jsonl", std::nullopt, "MainstreamGroup");
  run_ingest_file(ctx, testing::fixtures() / "portal.csv", std::nullopt, "RadicalRightPortal");
  run_extract(ctx);
  run_sample(ctx, 20);
  return ctx;
}

// Runs a Service on a free port for the lifetime of the object.
class Running {
 public:
  explicit Running(const CommandContext& ctx) : service_(ctx) {
    port_ = service_.bind("127.0.0.1", 0);
    thread_ = std::thread([this] { service_.run(); });
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    client_->set_read_timeout(30, 0);
    for (int i = 0; i < 200; ++i) {
      if (auto r = client_->Get("/health"); r && (r->status == 200 || r->status == 401)) break;
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
  }
  ~Running() {
    service_.stop();
    thread_.join();
  }
  httplib::Client& client() { return *client_; }
  int port() const { return port_; }

 private:
  Service service_;
  int port_ = 0;
  std::thread thread_;
  std::unique_ptr<httplib::Client> client_;
};

json body(const httplib::Result& r) {
  REQUIRE(r);
  return json::parse(r->body);
}

httplib::Result submit(httplib::Client& c, const std::string& sentence, const std::string& annotator,
                       const json& rating) {
  const json req{{"sentence_id", sentence}, {"annotator_id", annotator}, {"rating", rating}};
  return c.Post("/annotation/submit", req.dump(), "application/json");
}

json wait_job(httplib::Client& c, const std::string& id) {
  for (int i = 0; i < 3000; ++i) {
    const auto j = body(c.Get("/jobs/" + id));
    if (j["status"] == "done" || j["status"] == "failed") return j;
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  FAIL("job did not finish");
  return {};
}

}  // namespace

TEST_CASE("annotators work through their batches over HTTP") {
  testing::TempDir dir("svc");
  const auto ctx = prepared(dir.path());
  Running server(ctx);
  auto& c = server.client();

  CHECK(body(c.Get("/annotation/mapping"))["4"] == "Supportive");
  CHECK(body(c.Get("/guidelines"))["version"] == "v1");

  const auto first = body(c.Get("/annotation/next?annotator=ann1"));
  const std::string sid = first["sentence_id"];
  CHECK_FALSE(first["text"].get<std::string>().empty());
  CHECK(first["progress"]["done"] == 0);
  const std::size_t total = first["progress"]["total"];
  CHECK(total > 0);

  const auto ok = submit(c, sid, "ann1", 4);
  REQUIRE(ok);
  CHECK(ok->status == 200);
  const auto rec = json::parse(ok->body);
  CHECK(rec["label"] == "Supportive");
  CHECK(rec["progress"]["done"] == 1);

  const auto bad = submit(c, sid, "ann1", 7);
  REQUIRE(bad);
  CHECK(bad->status == 400);
  const auto err = json::parse(bad->body);
  CHECK(err["code"] == "validation_error");
  CHECK(err["details"]["field"] == "rating");
  CHECK(err["details"]["value"] == 7);

  CHECK(submit(c, "nope:0", "ann1", "3")->status == 400);
  CHECK(c.Post("/annotation/submit", "{not json", "application/json")->status == 400);
  CHECK(c.Get("/annotation/next?annotator=nobody")->status == 404);
  CHECK(c.Get("/annotation/next")->status == 400);

  // finish ann1's queue; an ambiguous rating counts as done too
  std::size_t submitted = 1;
  for (;;) {
    const auto r = c.Get("/annotation/next?annotator=ann1");
    REQUIRE(r);
    if (r->status == 204) break;
    const auto next = json::parse(r->body);
    CHECK(next["sentence_id"] != sid);
    REQUIRE(submit(c, next["sentence_id"], "ann1", submitted % 2 ? "A" : "2")->status == 200);
    ++submitted;
  }
  CHECK(submitted == total);

  const auto progress = body(c.Get("/annotation/progress"));
  CHECK(progress["annotators"]["ann1"]["done"] == total);
  CHECK(progress["live_records"] == total);

  // the third annotator rates the overlap subsets, all Neutral
  std::size_t third = 0;
  for (;; ++third) {
    const auto r = c.Get("/annotation/next?annotator=ann3");
    REQUIRE(r);
    if (r->status == 204) break;
    const std::string id = json::parse(r->body)["sentence_id"];
    REQUIRE(submit(c, id, "ann3", "3")->status == 200);
  }
  CHECK(third > 0);
  const auto agreement = body(c.Get("/agreement?variant=two"));
  REQUIRE(agreement["pairs"].size() == 1);
  CHECK(agreement["pairs"][0]["first"] == "ann1");
  CHECK(agreement["pairs"][0]["second"] == "ann3");
  const std::size_t shared = agreement["pairs"][0]["shared"];
  CHECK(shared > 0);
  CHECK(shared <= third);
  CHECK(agreement["pairs"][0]["variants"].contains("two"));
  CHECK(c.Get("/agreement?variant=seven")->status == 400);

  CHECK(c.Get("/no/such/path")->status == 404);
}

TEST_CASE("jobs and series over HTTP") {
  testing::TempDir dir("svc-jobs");
  const auto ctx = prepared(dir.path());
  run_train_nb(ctx, testing::fixtures() / "labeled.csv");
  Running server(ctx);
  auto& c = server.client();

  CHECK(c.Get("/series/fig1.csv")->status == 404);

  const auto submitted = c.Post("/jobs/classify", R"({"backend":"nb"})", "application/json");
  REQUIRE(submitted);
  CHECK(submitted->status == 202);
  const std::string id = json::parse(submitted->body)["id"];
  const auto done = wait_job(c, id);
  CHECK(done["status"] == "done");
  CHECK(done["progress"]["done"] == done["progress"]["total"]);
  CHECK(done["result"]["failures"] == 0);

  const std::string trends = json::parse(c.Post("/jobs/trends", "{}", "application/json")->body)["id"];
  CHECK(wait_job(c, trends)["status"] == "done");
  const auto series = c.Get("/series/fig1.csv");
  REQUIRE(series);
  CHECK(series->status == 200);
  CHECK(series->body == read_file(dir / "trends/fig1.csv"));

  const auto escape = c.Post("/jobs/evaluate", R"({"labeled":"../../etc/passwd"})", "application/json");
  CHECK(escape->status == 400);
  CHECK(c.Post("/jobs/trends", R"({"threshold":0.2})", "application/json")->status == 400);
  CHECK(c.Post("/jobs/ingest", "{}", "application/json")->status == 404);
  CHECK(c.Get("/jobs/job-999")->status == 404);

  const std::string failing = json::parse(c.Post("/jobs/similarity", "{}", "application/json")->body)["id"];
  const auto failed = wait_job(c, failing);
  CHECK(failed["status"] == "failed");
  CHECK_FALSE(failed["error"].is_null());
  CHECK(body(c.Get("/jobs"))["jobs"].size() == 3);
}

TEST_CASE("a configured token is required on every request") {
  testing::TempDir dir("svc-auth");
  auto ctx = prepared(dir.path());
  ctx.config.service.token_env = "STANCE_SERVICE_TEST_TOKEN";
  ::unsetenv("STANCE_SERVICE_TEST_TOKEN");
  CHECK_THROWS_AS(Service{ctx}, ValidationError);

  ::setenv("STANCE_SERVICE_TEST_TOKEN", "s3cret", 1);
  Running server(ctx);
  auto& c = server.client();
  const auto denied = c.Get("/health");
  REQUIRE(denied);
  CHECK(denied->status == 401);
  CHECK(json::parse(denied->body)["code"] == "unauthorized");
  c.set_bearer_token_auth("wrong");
  CHECK(c.Get("/health")->status == 401);
  c.set_bearer_token_auth("s3cret");
  CHECK(c.Get("/health")->status == 200);
  ::unsetenv("STANCE_SERVICE_TEST_TOKEN");
}

TEST_CASE("annotations survive a restart and a corrupt store is refused") {
  testing::TempDir dir("svc-durable");
  const auto ctx = prepared(dir.path());
  std::string sid;
  {
    Running server(ctx);
    auto& c = server.client();
    sid = body(c.Get("/annotation/next?annotator=ann1"))["sentence_id"];
    REQUIRE(submit(c, sid, "ann1", 1)->status == 200);
  }
  {
    Running server(ctx);
    auto& c = server.client();
    const auto progress = body(c.Get("/annotation/progress"));
    CHECK(progress["live_records"] == 1);
    CHECK(body(c.Get("/annotation/next?annotator=ann1"))["sentence_id"] != sid);
  }

  SUBCASE("a busy port is a validation error") {
    Running server(ctx);
    Service second(ctx);
    CHECK_THROWS_AS(second.bind("127.0.0.1", server.port()), ValidationError);
  }
  SUBCASE("a corrupt line before the tail is fatal") {
    const std::string log = read_file(ctx.layout().annotation_log());
    atomic_write(ctx.layout().annotation_log(), "{garbage\n" + log);
    CHECK_THROWS_AS(Service{ctx}, ValidationError);
  }
}
