#include "stance/service.h"

#include <algorithm>
#include <atomic>
#include <csignal>
#include <cstdlib>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <shared_mutex>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "stance/annotation.h"
#include "stance/article_store.h"
#include "stance/embedded_data.h"
#include "stance/errors.h"
#include "stance/extract.h"
#include "stance/fsutil.h"
#include "stance/jobs.h"
#include "stance/trends.h"

namespace stance {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

// Raised inside handlers to produce a specific status and error code.
struct HttpError {
  int status;
  std::string code;
  std::string message;
  ordered_json details = ordered_json::object();
};

void send_json(httplib::Response& res, int status, const ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message,
                const ordered_json& details = ordered_json::object()) {
  send_json(res, status, {{"code", code}, {"message", message}, {"details", details}});
}

ordered_json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return ordered_json::object();
  try {
    auto j = ordered_json::parse(req.body);
    if (!j.is_object()) throw HttpError{400, "validation_error", "request body must be a JSON object"};
    return j;
  } catch (const ordered_json::parse_error& e) {
    throw HttpError{400, "validation_error", "malformed JSON body", {{"error", e.what()}}};
  }
}

std::optional<std::string> string_field(const ordered_json& body, const std::string& key) {
  if (!body.contains(key) || body[key].is_null()) return std::nullopt;
  if (!body[key].is_string()) throw HttpError{400, "validation_error", key + " must be a string", {{"field", key}}};
  return body[key].get<std::string>();
}

bool tokens_equal(const std::string& a, const std::string& b) {
  unsigned char diff = a.size() == b.size() ? 0 : 1;
  for (std::size_t i = 0; i < a.size(); ++i) diff |= a[i] ^ (i < b.size() ? b[i] : 0);
  return diff == 0;
}

ordered_json job_to_json(const JobInfo& info) {
  ordered_json j;
  j["id"] = info.id;
  j["kind"] = job_kind_name(info.kind);
  j["status"] = job_status_name(info.status);
  j["progress"] = {{"done", info.done}, {"total", info.total}};
  j["log_path"] = info.log_path.string();
  j["error"] = info.error.empty() ? ordered_json(nullptr) : ordered_json(info.error);
  j["result"] = info.result.empty() ? ordered_json(nullptr) : ordered_json::parse(info.result);
  return j;
}

}  // namespace

struct Service::Impl {
  CommandContext ctx;
  DataLayout layout;
  std::string token;
  AnnotationStore annotations;
  JobRunner jobs;
  httplib::Server server;

  std::mutex pipeline_mu;  // one data-writing command at a time
  mutable std::shared_mutex texts_mu;
  std::map<std::string, std::string> texts;  // sentence id -> text

  explicit Impl(CommandContext c)
      : ctx(std::move(c)),
        layout(ctx.layout()),
        annotations(layout.annotation_log()),
        jobs(ctx.config.service.workers, layout.jobs()) {
    const auto& env = ctx.config.service.token_env;
    if (!env.empty()) {
      const char* value = std::getenv(env.c_str());
      if (!value || !*value) throw ValidationError("service token variable " + env + " is not set");
      token = value;
    }
    ArticleStore probe(layout.root);  // throws on a corrupt store
    reload_texts();
    if (fs::exists(layout.batches())) batches_from_json(read_file(layout.batches()));
    fs::create_directories(layout.annotation());
  }

  void reload_texts() {
    std::map<std::string, std::string> fresh;
    if (fs::exists(layout.sentences())) {
      for (auto& s : sentences_from_jsonl(read_file(layout.sentences()))) fresh[s.sentence.id()] = s.sentence.text;
    }
    std::unique_lock lock(texts_mu);
    texts = std::move(fresh);
  }

  std::optional<std::string> text_of(const std::string& id) const {
    std::shared_lock lock(texts_mu);
    auto it = texts.find(id);
    if (it == texts.end()) return std::nullopt;
    return it->second;
  }

  std::vector<AnnotationBatch> batches() const {
    if (!fs::exists(layout.batches())) return {};
    return batches_from_json(read_file(layout.batches()));
  }

  struct Task {
    std::string sentence_id;
    std::string batch_id;
  };

  // The annotator's batches interleaved round robin, each sentence once.
  std::vector<Task> tasks_for(const std::string& annotator) const {
    std::vector<const AnnotationBatch*> mine;
    const auto all = batches();
    for (const auto& b : all) {
      if (std::find(b.annotators.begin(), b.annotators.end(), annotator) != b.annotators.end()) mine.push_back(&b);
    }
    std::vector<Task> out;
    std::set<std::string> seen;
    for (std::size_t i = 0;; ++i) {
      bool any = false;
      for (const auto* b : mine) {
        if (i >= b->sentence_ids.size()) continue;
        any = true;
        if (seen.insert(b->sentence_ids[i]).second) out.push_back({b->sentence_ids[i], b->id});
      }
      if (!any) break;
    }
    return out;
  }

  ordered_json progress_of(const std::string& annotator, const std::vector<Task>& tasks) const {
    std::size_t done = 0;
    for (const auto& t : tasks) {
      if (annotations.live_record(t.sentence_id, annotator)) ++done;
    }
    return {{"done", done}, {"total", tasks.size()}};
  }

  std::vector<std::string> known_annotators() const {
    std::set<std::string> names;
    for (const auto& b : batches()) names.insert(b.annotators.begin(), b.annotators.end());
    return {names.begin(), names.end()};
  }

  fs::path data_path(const std::string& value) const {
    const fs::path p = fs::path(value).lexically_normal();
    if (p.is_absolute() || p.empty() || *p.begin() == "..") {
      throw HttpError{400, "validation_error", "paths must be relative to the data directory", {{"path", value}}};
    }
    return layout.root / p;
  }

  template <typename F>
  static httplib::Server::Handler guard(F&& fn) {
    return [fn = std::forward<F>(fn)](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const HttpError& e) {
        send_error(res, e.status, e.code, e.message, e.details);
      } catch (const ValidationError& e) {
        send_error(res, 400, "validation_error", e.what());
      } catch (const ordered_json::exception& e) {
        send_error(res, 400, "validation_error", "bad request field", {{"error", e.what()}});
      } catch (const BackendError& e) {
        send_error(res, 502, "backend_error", e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, "internal_error", e.what());
      }
    };
  }

  std::string submit_job(JobKind kind, const ordered_json& body) {
    CommandContext base = ctx;
    std::function<Summary(const CommandContext&)> command;
    switch (kind) {
      case JobKind::kClassify: {
        ClassifyOptions o;
        o.backend = string_field(body, "backend").value_or("nb");
        command = [o](const CommandContext& c) { return run_classify(c, o); };
        break;
      }
      case JobKind::kEvaluate: {
        EvalOptions o;
        o.backend = string_field(body, "backend").value_or("nb");
        if (body.contains("k")) o.k = body.at("k").get<std::size_t>();
        o.eval_fraction = body.value("eval_fraction", 1.0 / static_cast<double>(o.k));
        if (auto p = string_field(body, "labeled")) o.labeled = data_path(*p);
        if (auto p = string_field(body, "predictions")) o.predictions = data_path(*p);
        command = [o](const CommandContext& c) { return run_eval(c, o); };
        break;
      }
      case JobKind::kTrends: {
        TrendOptions o;
        o.backend = string_field(body, "backend").value_or("nb");
        if (auto p = string_field(body, "predictions")) o.predictions = data_path(*p);
        if (auto g = string_field(body, "granularity")) {
          auto parsed = parse_granularity(*g);
          if (!parsed) throw HttpError{400, "validation_error", "unknown granularity", {{"field", "granularity"}}};
          o.granularity = *parsed;
        }
        if (body.contains("threshold") && !body["threshold"].is_null()) {
          o.threshold = body["threshold"].get<double>();
          validate_threshold(*o.threshold);
        }
        o.plot_data = body.value("plot_data", false);
        command = [o](const CommandContext& c) { return run_trends(c, o); };
        break;
      }
      case JobKind::kSimilarity: {
        SimilarityCommandOptions o;
        o.backend = string_field(body, "backend").value_or("nb");
        if (auto p = string_field(body, "predictions")) o.predictions = data_path(*p);
        command = [o](const CommandContext& c) { return run_similarity(c, o); };
        break;
      }
      default:
        throw HttpError{404, "not_found", "no such job kind"};
    }
    return jobs.submit(kind, [this, base, command](JobContext& job) {
      CommandContext c = base;
      c.job = &job;
      std::lock_guard lock(pipeline_mu);
      return command(c).dump();
    });
  }

  void routes() {
    server.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
      if (token.empty()) return httplib::Server::HandlerResponse::Unhandled;
      const std::string header = req.get_header_value("Authorization");
      if (header.rfind("Bearer ", 0) == 0 && tokens_equal(header.substr(7), token)) {
        return httplib::Server::HandlerResponse::Unhandled;
      }
      send_error(res, 401, "unauthorized", "missing or wrong bearer token");
      return httplib::Server::HandlerResponse::Handled;
    });

    server.Get("/health", guard([](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, {{"status", "ok"}});
    }));

    server.Post("/ingest", guard([this](const httplib::Request& req, httplib::Response& res) {
      const std::string publisher = req.get_param_value("publisher");
      if (publisher.empty()) throw HttpError{400, "validation_error", "publisher query parameter required"};
      const auto format = parse_ingest_format(req.has_param("format") ? req.get_param_value("format") : "jsonl");
      if (!format) throw HttpError{400, "validation_error", "format must be csv or jsonl", {{"field", "format"}}};
      std::istringstream in(req.body);
      std::lock_guard lock(pipeline_mu);
      send_json(res, 200, run_ingest(ctx, in, *format, publisher, "http"));
    }));

    server.Post("/extract", guard([this](const httplib::Request&, httplib::Response& res) {
      std::lock_guard lock(pipeline_mu);
      auto summary = run_extract(ctx);
      reload_texts();
      send_json(res, 200, summary);
    }));

    server.Get("/guidelines", guard([this](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, {{"version", ctx.config.annotation.guideline_version},
                           {"text", std::string(embedded::kGuidelineText)}});
    }));

    server.Get("/annotation/mapping", guard([](const httplib::Request&, httplib::Response& res) {
      ordered_json j;
      for (int v = 1; v <= 5; ++v) j[std::to_string(v)] = label_name(collapse_rating(RawRating::scale(v)));
      j["A"] = label_name(collapse_rating(RawRating::ambiguous()));
      send_json(res, 200, j);
    }));

    server.Get("/annotation/next", guard([this](const httplib::Request& req, httplib::Response& res) {
      const std::string annotator = req.get_param_value("annotator");
      if (annotator.empty()) throw HttpError{400, "validation_error", "annotator query parameter required"};
      const auto tasks = tasks_for(annotator);
      if (tasks.empty()) throw HttpError{404, "not_found", "no batches assigned to " + annotator};
      for (const auto& t : tasks) {
        if (annotations.live_record(t.sentence_id, annotator)) continue;
        const auto text = text_of(t.sentence_id);
        if (!text) throw ValidationError("batch sentence " + t.sentence_id + " is not in the extracted corpus");
        ordered_json j;
        j["sentence_id"] = t.sentence_id;
        j["text"] = *text;
        j["batch_id"] = t.batch_id;
        j["progress"] = progress_of(annotator, tasks);
        j["guideline_version"] = ctx.config.annotation.guideline_version;
        j["allowed_ratings"] = {"1", "2", "3", "4", "5", "A"};
        send_json(res, 200, j);
        return;
      }
      res.status = 204;
    }));

    server.Post("/annotation/submit", guard([this](const httplib::Request& req, httplib::Response& res) {
      const auto body = parse_body(req);
      const auto sentence_id = string_field(body, "sentence_id");
      const auto annotator = string_field(body, "annotator_id");
      if (!sentence_id || sentence_id->empty()) {
        throw HttpError{400, "validation_error", "sentence_id required", {{"field", "sentence_id"}}};
      }
      if (!annotator || annotator->empty()) {
        throw HttpError{400, "validation_error", "annotator_id required", {{"field", "annotator_id"}}};
      }
      if (!body.contains("rating")) throw HttpError{400, "validation_error", "rating required", {{"field", "rating"}}};
      const auto& r = body["rating"];
      std::optional<RawRating> rating;
      if (r.is_number_integer()) {
        rating = parse_raw_rating(std::to_string(r.get<long long>()));
      } else if (r.is_string()) {
        rating = parse_raw_rating(r.get<std::string>());
      }
      if (!rating) {
        throw HttpError{400, "validation_error", "rating must be 1-5 or A",
                        {{"field", "rating"}, {"value", r}, {"allowed", {"1", "2", "3", "4", "5", "A"}}}};
      }
      if (!text_of(*sentence_id)) {
        throw HttpError{400, "validation_error", "unknown sentence", {{"field", "sentence_id"}, {"value", *sentence_id}}};
      }
      const std::string version =
          string_field(body, "guideline_version").value_or(ctx.config.annotation.guideline_version);
      const AnnotationRecord record = make_record(*sentence_id, *annotator, *rating, version);
      annotations.submit(record);
      auto j = ordered_json::parse(record_to_json(record));
      j["progress"] = progress_of(*annotator, tasks_for(*annotator));
      send_json(res, 200, j);
    }));

    server.Get("/annotation/progress", guard([this](const httplib::Request&, httplib::Response& res) {
      ordered_json annotators = ordered_json::object();
      std::size_t done = 0, total = 0;
      for (const auto& name : known_annotators()) {
        auto p = progress_of(name, tasks_for(name));
        done += p["done"].get<std::size_t>();
        total += p["total"].get<std::size_t>();
        annotators[name] = p;
      }
      send_json(res, 200, {{"annotators", annotators}, {"done", done}, {"total", total},
                           {"live_records", annotations.live().size()}});
    }));

    server.Get("/agreement", guard([this](const httplib::Request& req, httplib::Response& res) {
      std::vector<KappaVariant> variants{KappaVariant::kSixCategory, KappaVariant::kFourCategory,
                                         KappaVariant::kThreeMergedNeutral, KappaVariant::kThreeCategory,
                                         KappaVariant::kTwoCategory};
      if (req.has_param("variant")) {
        auto v = parse_kappa_variant(req.get_param_value("variant"));
        if (!v) throw HttpError{400, "validation_error", "unknown kappa variant", {{"field", "variant"}}};
        variants = {*v};
      }
      std::map<std::string, std::map<std::string, RawRating>> by_annotator;
      for (const auto& r : annotations.live()) by_annotator[r.annotator_id].emplace(r.sentence_id, r.raw);
      ordered_json pairs = ordered_json::array();
      for (auto a = by_annotator.begin(); a != by_annotator.end(); ++a) {
        for (auto b = std::next(a); b != by_annotator.end(); ++b) {
          std::vector<RawRating> ra, rb;
          for (const auto& [id, rating] : a->second) {
            auto it = b->second.find(id);
            if (it == b->second.end()) continue;
            ra.push_back(rating);
            rb.push_back(it->second);
          }
          if (ra.empty()) continue;
          ordered_json entry{{"first", a->first}, {"second", b->first}, {"shared", ra.size()}};
          for (auto v : variants) {
            ordered_json k;
            try {
              const auto result = variant_kappa(ra, rb, v);
              k = {{"kappa", result.kappa}, {"n", result.n}};
            } catch (const ValidationError&) {
              k = {{"kappa", nullptr}, {"n", 0}};
            }
            entry["variants"][std::string(kappa_variant_name(v))] = k;
          }
          pairs.push_back(entry);
        }
      }
      send_json(res, 200, {{"pairs", pairs}});
    }));

    server.Post(R"(/jobs/([a-z]+))", guard([this](const httplib::Request& req, httplib::Response& res) {
      const auto kind = parse_job_kind(req.matches[1].str());
      if (!kind || (*kind != JobKind::kClassify && *kind != JobKind::kEvaluate && *kind != JobKind::kTrends &&
                    *kind != JobKind::kSimilarity)) {
        throw HttpError{404, "not_found", "no such job kind", {{"kind", req.matches[1].str()}}};
      }
      const std::string id = submit_job(*kind, parse_body(req));
      res.set_header("Location", "/jobs/" + id);
      send_json(res, 202, {{"id", id}, {"status", "queued"}});
    }));

    server.Get(R"(/jobs/(job-[0-9]+))", guard([this](const httplib::Request& req, httplib::Response& res) {
      const auto info = jobs.get(req.matches[1].str());
      if (!info) throw HttpError{404, "not_found", "no such job", {{"id", req.matches[1].str()}}};
      send_json(res, 200, job_to_json(*info));
    }));

    server.Delete(R"(/jobs/(job-[0-9]+))", guard([this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1].str();
      if (!jobs.get(id)) throw HttpError{404, "not_found", "no such job", {{"id", id}}};
      send_json(res, 200, {{"id", id}, {"cancelled", jobs.cancel(id)}});
    }));

    server.Get("/jobs", guard([this](const httplib::Request&, httplib::Response& res) {
      ordered_json list = ordered_json::array();
      for (const auto& info : jobs.list()) list.push_back(job_to_json(info));
      send_json(res, 200, {{"jobs", list}});
    }));

    server.Get(R"(/series/(fig1|fig3|stance|groups|similarity)\.csv)",
               guard([this](const httplib::Request& req, httplib::Response& res) {
                 const std::string name = req.matches[1].str();
                 const fs::path path = name == "similarity" ? layout.similarity() / "similarity.csv"
                                                            : layout.trends() / (name + ".csv");
                 if (!fs::exists(path)) {
                   throw HttpError{404, "not_found", "series not produced yet", {{"series", name}}};
                 }
                 res.status = 200;
                 res.set_content(read_file(path), "text/csv");
               }));

    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.status == 404 && res.body.empty()) send_error(res, 404, "not_found", "no such endpoint");
    });
  }
};

Service::Service(CommandContext ctx) : impl_(std::make_unique<Impl>(std::move(ctx))) {
  const std::size_t threads = std::max<std::size_t>(4, impl_->ctx.config.service.workers * 2);
  impl_->server.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
  // The library default is SO_REUSEPORT, which lets a second server share a
  // busy port silently.
  impl_->server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
  });
  impl_->routes();
}

Service::~Service() { stop(); }

int Service::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw ValidationError("cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw ValidationError("cannot bind " + host + ":" + std::to_string(port) + " (port in use?)");
  }
  return port;
}

void Service::run() { impl_->server.listen_after_bind(); }

void Service::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

namespace {

std::atomic<Service*> g_running{nullptr};

extern "C" void handle_signal(int) {
  if (Service* s = g_running.load()) s->stop();
}

}  // namespace

void serve(const CommandContext& ctx) {
  Service service(ctx);
  const auto& s = ctx.config.service;
  const int port = service.bind(s.host, s.port);
  std::cerr << "listening on " << s.host << ":" << port << "\n";
  g_running.store(&service);
  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  service.run();
  g_running.store(nullptr);
}

}  // namespace stance
