#include <doctest.h>

#include <fstream>
#include <thread>

#include <httplib.h>

#include "agepost/http_api.hpp"
#include "agepost/serialize.hpp"
#include "agepost/service.hpp"
#include "../support/service_fixture.hpp"
#include "../support/test_util.hpp"

using namespace agepost;

namespace {

QueryItem make_query(const std::string& id, int hint, Gender g = Gender::Male) {
  QueryItem q;
  q.id = id;
  q.gender = g;
  q.rough_age_hint = hint;
  return q;
}

void judge_all(AnnotationService& svc, const std::string& task_id, int truth) {
  while (auto ref = svc.next_comparison(task_id)) {
    svc.submit_comparison(task_id, ref->id, truth > ref->age ? Outcome::Older : Outcome::Younger, "t");
  }
}

}  // namespace

TEST_CASE("task creation") {
  const auto dir = fixture::fresh_dir("create");
  AnnotationService svc(fixture::config_for(dir), fixture::full_pool());
  const auto task = svc.create_task(make_query("q1", 30));
  CHECK(task.task_id == "t000001");
  CHECK(task.references.size() == 6);
  CHECK(task.remaining() == 6);
  CHECK(task.status == TaskStatus::Open);
  for (int i = 0; i < 3; ++i) CHECK(task.references[i].age < 30);
  for (int i = 3; i < 6; ++i) CHECK(task.references[i].age > 30);
  CHECK(svc.summary(task.task_id).posterior == AgeDistribution::uniform(AgeGrid(0, 70)));

  try {
    svc.create_task(make_query("q1", 40));
    FAIL("expected DuplicateQuery");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DuplicateQuery);
    CHECK(std::string(e.what()).find("t000001") != std::string::npos);
  }

  std::vector<ReferenceItem> males;
  for (const auto& r : fixture::full_pool()) {
    if (r.gender == Gender::Male) males.push_back(r);
  }
  AnnotationService male_only(fixture::config_for(fixture::fresh_dir("males")), males);
  try {
    male_only.create_task(make_query("qf", 30, Gender::Female));
    FAIL("expected InsufficientPool");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InsufficientPool);
    CHECK(std::string(e.what()).find("hint") != std::string::npos);
  }
  CHECK(male_only.last_seq() == 0);
  CHECK_CODE(svc.create_task(make_query("q2", 99)), ErrorCode::InvalidArgument);
}

TEST_CASE("comparison flow and offline recomputation") {
  const auto dir = fixture::fresh_dir("flow");
  AnnotationService svc(fixture::config_for(dir), fixture::full_pool());
  const auto id = svc.create_task(make_query("q1", 30)).task_id;
  const auto task = svc.get_task(id);

  CHECK_CODE(svc.submit_comparison(id, task.references[1].id, Outcome::Older, "a"), ErrorCode::OutOfOrderReference);
  CHECK_CODE(svc.submit_comparison(id, "nope", Outcome::Older, "a"), ErrorCode::UnknownReference);
  CHECK_CODE(svc.submit_comparison("t999999", task.references[0].id, Outcome::Older, "a"), ErrorCode::UnknownTask);
  CHECK_CODE(svc.finalize_task(id), ErrorCode::QueueNotExhausted);
  CHECK_CODE(svc.finalize_task(id, true), ErrorCode::NoEvidence);
  CHECK(svc.last_seq() == 1);

  const auto first = svc.submit_comparison(id, task.references[0].id, Outcome::Older, "a");
  CHECK(first.remaining == 5);
  CHECK_CODE(svc.finalize_task(id), ErrorCode::QueueNotExhausted);
  CHECK_CODE(svc.submit_comparison(id, task.references[0].id, Outcome::Older, "a"), ErrorCode::OutOfOrderReference);

  judge_all(svc, id, 31);
  CHECK_FALSE(svc.next_comparison(id).has_value());
  const auto rec = svc.finalize_task(id);
  const auto done = svc.get_task(id);
  CHECK(done.status == TaskStatus::Finalized);
  REQUIRE(done.events.size() == 6);

  // Same events through the offline pipeline: equal to the last bit.
  const auto offline = finalize_annotation("q1", done.events, LogisticModel(0.36), AgeDistribution::uniform(AgeGrid(0, 70)));
  CHECK(rec == offline);
  const auto served = svc.summary(id).posterior;
  const auto direct = posterior_from_events(LogisticModel(0.36), AgeDistribution::uniform(AgeGrid(0, 70)), done.events);
  CHECK(served == direct);

  CHECK_CODE(svc.submit_comparison(id, task.references[0].id, Outcome::Older, "a"), ErrorCode::TaskClosed);
  CHECK_CODE(svc.finalize_task(id), ErrorCode::TaskClosed);
  CHECK_CODE(svc.next_comparison(id), ErrorCode::TaskClosed);
  CHECK(svc.export_records(false).size() == 1);
}

TEST_CASE("forced finalize and discard") {
  const auto dir = fixture::fresh_dir("discard");
  AnnotationService svc(fixture::config_for(dir), fixture::full_pool());
  const auto id = svc.create_task(make_query("q1", 30)).task_id;
  const auto ref = *svc.next_comparison(id);
  svc.submit_comparison(id, ref.id, Outcome::Older, "a");
  const auto rec = svc.finalize_task(id, true);
  // One comparison leaves a wide posterior.
  CHECK(rec.status == AnnotationStatus::Discarded);
  CHECK(svc.get_task(id).status == TaskStatus::Discarded);
  CHECK(svc.export_records(false).empty());
  CHECK(svc.export_records(true).size() == 1);
  CHECK(svc.list_tasks(TaskStatus::Discarded).size() == 1);
  CHECK(svc.list_tasks(TaskStatus::Open).empty());
}

TEST_CASE("replay reproduces live state") {
  for (std::size_t snapshot_every : {1000, 7}) {
    const auto dir = fixture::fresh_dir("replay");
    Json live_state;
    std::vector<AnnotationRecord> live_export;
    {
      AnnotationService svc(fixture::config_for(dir, snapshot_every), fixture::full_pool());
      const auto stats = fixture::run_script(svc, 20, 3);
      CHECK(stats.created == 20);
      CHECK(stats.finalized == 20);
      live_state = svc.state_json();
      live_export = svc.export_records(true);
    }
    CHECK(std::filesystem::exists(dir / "snapshot.json") == (snapshot_every == 7));
    {
      AnnotationService again(fixture::config_for(dir, snapshot_every), fixture::full_pool());
      CHECK(again.state_json() == live_state);
      CHECK(again.export_records(true) == live_export);
    }
    std::filesystem::remove(dir / "snapshot.json");
    AnnotationService from_log(fixture::config_for(dir, snapshot_every), fixture::full_pool());
    CHECK(from_log.state_json() == live_state);
    // Ids keep counting after a restart.
    CHECK(from_log.create_task(make_query("late", 40)).task_id == "t000021");
  }
}

TEST_CASE("replay after every prefix") {
  const auto dir = fixture::fresh_dir("prefix");
  std::vector<std::string> lines;
  Json live;
  {
    AnnotationService svc(fixture::config_for(dir), fixture::full_pool());
    fixture::run_script(svc, 4, 9);
    live = svc.state_json();
  }
  {
    std::ifstream in(dir / "events.jsonl");
    for (std::string l; std::getline(in, l);) lines.push_back(l);
  }
  for (std::size_t n = 0; n <= lines.size(); ++n) {
    const auto sub = fixture::fresh_dir("prefix_sub");
    std::filesystem::create_directories(sub);
    std::ofstream out(sub / "events.jsonl");
    for (std::size_t i = 0; i < n; ++i) out << lines[i] << '\n';
    out.close();
    AnnotationService svc(fixture::config_for(sub), fixture::full_pool());
    CHECK(svc.last_seq() == n);
    if (n == lines.size()) CHECK(svc.state_json() == live);
  }
}

TEST_CASE("torn tail and tampering") {
  const auto dir = fixture::fresh_dir("torn");
  {
    AnnotationService svc(fixture::config_for(dir), fixture::full_pool());
    const auto id = svc.create_task(make_query("q1", 30)).task_id;
    judge_all(svc, id, 30);
    svc.finalize_task(id);
  }
  {
    std::ofstream out(dir / "events.jsonl", std::ios::app);
    out << R"({"seq":9,"kind":"comparison_sub)";
  }
  {
    AnnotationService svc(fixture::config_for(dir), fixture::full_pool());
    CHECK(svc.last_seq() == 8);
    CHECK(svc.get_task("t000001").status != TaskStatus::Open);
  }
  // A logged record that disagrees with the logged events must not load.
  auto text = read_file(dir / "events.jsonl");
  const auto pos = text.find("\"mode\":");
  REQUIRE(pos != std::string::npos);
  const auto end = text.find(',', pos);
  text.replace(pos, end - pos, "\"mode\":69");
  write_file(dir / "events.jsonl", text);
  CHECK_CODE(AnnotationService(fixture::config_for(dir), fixture::full_pool()), ErrorCode::DataError);

  const auto gap = fixture::fresh_dir("gap");
  std::filesystem::create_directories(gap);
  write_file(gap / "events.jsonl", R"({"seq":2,"kind":"task_created","payload":{}})" "\n");
  CHECK_CODE(AnnotationService(fixture::config_for(gap), fixture::full_pool()), ErrorCode::DataError);
}

TEST_CASE("concurrent clients keep the log gap-free") {
  const auto dir = fixture::fresh_dir("threads");
  Json live;
  {
    AnnotationService svc(fixture::config_for(dir, 25), fixture::full_pool());
    std::vector<std::thread> workers;
    for (int w = 0; w < 6; ++w) {
      workers.emplace_back([&svc, w] {
        for (int i = 0; i < 8; ++i) {
          const auto id = svc.create_task(make_query("w" + std::to_string(w) + "_" + std::to_string(i), 20 + 3 * i)).task_id;
          judge_all(svc, id, 21 + 3 * i);
          svc.finalize_task(id);
        }
      });
    }
    for (auto& t : workers) t.join();
    CHECK(svc.task_count() == 48);
    CHECK(svc.last_seq() == 48 * 8);
    live = svc.state_json();
  }
  const auto entries = EventLog::read_all(dir / "events.jsonl");
  CHECK(entries.size() == 48 * 8);
  AnnotationService again(fixture::config_for(dir, 25), fixture::full_pool());
  CHECK(again.state_json() == live);
}

TEST_CASE("routing table") {
  const auto dir = fixture::fresh_dir("routes");
  AnnotationService svc(fixture::config_for(dir), fixture::full_pool());
  auto call = [&](std::string method, std::string path, std::string body = "",
                  std::map<std::string, std::string> params = {}) {
    const auto res = handle_request(svc, {std::move(method), std::move(path), std::move(params), std::move(body)});
    return std::make_pair(res.status, res.content_type == "application/json" ? Json::parse(res.body) : Json(res.body));
  };

  auto [s, j] = call("GET", "/healthz");
  CHECK(s == 200);
  CHECK(j["status"] == "ok");

  std::tie(s, j) = call("POST", "/tasks", R"({"query":{"id":"q1","gender":"male","rough_age_hint":30}})");
  CHECK(s == 201);
  CHECK(j["task_id"] == "t000001");
  CHECK(j["remaining"] == 6);
  CHECK(j["pending_refs"].size() == 6);
  CHECK(j["ci90"] == Json::array({0, 63}));

  CHECK(call("POST", "/tasks", R"({"query":{"id":"q1","gender":"male"}})").first == 409);
  CHECK(call("POST", "/tasks", R"({"query":{"gender":"male"}})").first == 400);
  CHECK(call("POST", "/tasks", "{not json").first == 400);
  CHECK(call("GET", "/tasks/t000404").first == 404);
  CHECK(call("GET", "/nowhere").first == 404);
  CHECK(call("GET", "/tasks", "", {{"status", "weird"}}).first == 400);

  std::tie(s, j) = call("GET", "/tasks/t000001/next");
  CHECK(j["exhausted"] == false);
  const std::string head = j["reference"]["id"];
  std::tie(s, j) = call("POST", "/tasks/t000001/comparisons", R"({"ref_id":"zzz","outcome":"older"})");
  CHECK(s == 422);
  CHECK(j["error"] == "UnknownReference");
  CHECK(call("POST", "/tasks/t000001/comparisons", R"({"ref_id":")" + head + R"(","outcome":"sideways"})").first == 400);
  CHECK(call("POST", "/tasks/t000001/finalize", "{}").first == 409);
  CHECK(call("POST", "/tasks/t000001/finalize", R"({"force":true})").first == 422);  // no evidence yet

  for (int i = 0; i < 6; ++i) {
    std::tie(s, j) = call("GET", "/tasks/t000001/next");
    const std::string ref = j["reference"]["id"];
    const int age = j["reference"]["age"];
    std::tie(s, j) = call("POST", "/tasks/t000001/comparisons",
                          Json{{"ref_id", ref}, {"outcome", age < 31 ? "older" : "younger"}, {"annotator_id", "u"}}.dump());
    CHECK(s == 200);
    CHECK(j["remaining"] == 5 - i);
  }
  std::tie(s, j) = call("GET", "/tasks/t000001/next");
  CHECK(j["exhausted"] == true);
  std::tie(s, j) = call("POST", "/tasks/t000001/finalize", "");
  CHECK(s == 200);
  CHECK(j["status"] == "labelled");
  CHECK(record_from_json(j) == *svc.get_task("t000001").record);
  CHECK(call("POST", "/tasks/t000001/finalize", "").first == 409);

  std::tie(s, j) = call("GET", "/tasks", "", {{"status", "finalized"}});
  CHECK(j["tasks"].size() == 1);
  const auto exp = handle_request(svc, {"GET", "/export", {}, ""});
  CHECK(exp.content_type == "application/x-ndjson");
  CHECK(record_from_json(Json::parse(exp.body)) == *svc.get_task("t000001").record);
}

TEST_CASE("http server end to end") {
  const auto dir = fixture::fresh_dir("http");
  AnnotationService svc(fixture::config_for(dir), fixture::full_pool());
  HttpServer server(svc);
  const int port = server.bind("127.0.0.1", 0);
  REQUIRE(port > 0);
  std::thread loop([&] { server.serve(); });

  httplib::Client client("127.0.0.1", port);
  auto res = client.Get("/healthz");
  REQUIRE(res);
  CHECK(res->status == 200);
  res = client.Post("/tasks", R"({"query":{"id":"h1","gender":"female","rough_age_hint":45}})", "application/json");
  REQUIRE(res);
  CHECK(res->status == 201);
  const auto id = Json::parse(res->body)["task_id"].get<std::string>();
  for (int i = 0; i < 6; ++i) {
    const auto next = Json::parse(client.Get("/tasks/" + id + "/next")->body);
    const int age = next["reference"]["age"];
    res = client.Post("/tasks/" + id + "/comparisons",
                      Json{{"ref_id", next["reference"]["id"]}, {"outcome", age < 45 ? "older" : "younger"}}.dump(),
                      "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    // Served numbers are the core's numbers.
    const auto served = distribution_from_json(Json::parse(res->body)["posterior"]);
    CHECK(served == posterior_from_events(LogisticModel(0.36), AgeDistribution::uniform(AgeGrid(0, 70)),
                                          svc.get_task(id).events));
  }
  res = client.Post("/tasks/" + id + "/finalize", "{}", "application/json");
  REQUIRE(res);
  CHECK(res->status == 200);
  res = client.Get("/export?include_discarded=true");
  REQUIRE(res);
  CHECK(record_from_json(Json::parse(res->body)) == *svc.get_task(id).record);
  res = client.Get("/tasks/nope");
  CHECK(res->status == 404);
  CHECK(Json::parse(res->body)["error"] == "UnknownTask");

  server.stop();
  loop.join();
}
