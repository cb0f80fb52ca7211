#include <doctest.h>

#include <httplib.h>

#include <fstream>
#include <set>
#include <thread>

#include "../support/fixtures.hpp"
#include "pathflow/server.hpp"
#include "pathflow/synth.hpp"

using namespace pathflow;
using nlohmann::json;

namespace {

constexpr std::size_t kEdPatients = 20000;

/// One server for the whole suite: two-patient ESS from CSV, a small ED synth and
/// a larger one for cancellation.
struct Fixture {
  std::filesystem::path dir = fixtures::scratch("server");
  std::unique_ptr<Server> server;
  int port = 0;

  Fixture() {
    auto params = read_json_file(fixtures::data("synth/ed.json"));
    params["patient_count"] = kEdPatients;
    std::ofstream(dir / "ed.json") << params.dump();
    params["patient_count"] = 2000000;
    std::ofstream(dir / "ed_big.json") << params.dump();
    const json config{
        {"datasets",
         {{{"name", "fig-ess"}, {"manifest", fixtures::data("fig_ess/manifest.json").string()},
           {"data", fixtures::data("fig_ess/events.csv").string()}},
          {{"name", "ed"}, {"manifest", fixtures::data("manifests/ed.json").string()}, {"synth", "ed.json"}},
          {{"name", "ed-big"}, {"manifest", fixtures::data("manifests/ed.json").string()}, {"synth", "ed_big.json"}}}},
        {"history_dir", "history"},
        {"port", 0},
        {"workers", 2}};
    std::filesystem::create_directories(dir / "history");
    server = std::make_unique<Server>(server_config_from_json(config, dir));
    port = server->start();
  }
  ~Fixture() { server->stop(); }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

httplib::Client client() {
  httplib::Client cli("127.0.0.1", fixture().port);
  cli.set_read_timeout(60, 0);
  return cli;
}

json post(const std::string& path, const json& body, int expect) {
  auto res = client().Post(path, body.dump(), "application/json");
  REQUIRE(res);
  CHECK(res->status == expect);
  return json::parse(res->body);
}

json get(const std::string& path, int expect = 200) {
  auto res = client().Get(path);
  REQUIRE(res);
  CHECK(res->status == expect);
  return json::parse(res->body);
}

std::string new_session(const std::string& dataset) {
  return post("/sessions", {{"dataset", dataset}}, 201)["session_id"].get<std::string>();
}

/// Reads a snapshot stream to its end and returns the frames.
std::vector<json> frames(const std::string& session, int* status = nullptr) {
  std::vector<json> out;
  std::string buffer;
  auto res = client().Get("/sessions/" + session + "/snapshots", [&](const char* data, std::size_t len) {
    buffer.append(data, len);
    std::size_t nl;
    while ((nl = buffer.find('\n')) != std::string::npos) {
      out.push_back(json::parse(buffer.substr(0, nl)));
      buffer.erase(0, nl + 1);
    }
    return true;
  });
  REQUIRE(res);
  if (status) *status = res->status;
  return out;
}

void check_stream(const std::vector<json>& fs) {
  REQUIRE(fs.size() >= 2);
  std::uint64_t last = 0;
  for (std::size_t i = 0; i + 1 < fs.size(); ++i) {
    CHECK(fs[i]["kind"] == "snapshot");
    CHECK(fs[i]["version"].get<std::uint64_t>() > last);
    last = fs[i]["version"].get<std::uint64_t>();
  }
  CHECK(fs[fs.size() - 2]["final"] == true);
  CHECK(fs.back()["kind"] == "done");
}

}  // namespace

TEST_SUITE("server") {
  TEST_CASE("datasets are listed") {
    const auto list = get("/datasets");
    REQUIRE(list.size() == 3);
    std::set<std::string> names;
    for (const auto& d : list) names.insert(d["name"].get<std::string>());
    CHECK(names == std::set<std::string>{"fig-ess", "ed", "ed-big"});
  }

  TEST_CASE("sessions are created with distinct ids") {
    const auto a = new_session("ed");
    const auto b = new_session("ed");
    CHECK(a != b);
    CHECK(get("/sessions/" + a)["state"] == "idle");
    post("/sessions", {{"dataset", "nope"}}, 404);
    post("/sessions", json::object(), 400);
    get("/sessions/zzz", 404);
  }

  TEST_CASE("a run streams snapshots until every patient is processed") {
    const auto s = new_session("ed");
    const auto accepted = post("/sessions/" + s + "/run", {{"quantum_ms", 50}}, 202);
    CHECK(accepted["state"] == "running");
    const auto fs = frames(s);
    check_stream(fs);
    const auto& last = fs[fs.size() - 2];
    CHECK(last["processed"] == kEdPatients);
    CHECK(last["total"] == kEdPatients);
    CHECK(last["tree"]["patients"] == kEdPatients);
    CHECK(fs.back()["history_entry"] == 1);
    CHECK(get("/sessions/" + s)["state"] == "done");
  }

  TEST_CASE("a second run while one is active is refused") {
    const auto s = new_session("ed-big");
    post("/sessions/" + s + "/run", {{"quantum_ms", 100}}, 202);
    post("/sessions/" + s + "/run", json::object(), 409);
    post("/sessions/" + s + "/cancel", json::object(), 200);
    const auto fs = frames(s);
    REQUIRE_FALSE(fs.empty());
    CHECK(fs.back()["kind"] == "done");
    CHECK(fs.back()["state"] == "cancelled");
    CHECK(fs.back()["processed"].get<std::uint64_t>() < fs.back()["total"].get<std::uint64_t>());
    CHECK_FALSE(fs.back().contains("history_entry"));
  }

  TEST_CASE("invalid filters are rejected with violations") {
    const auto s = new_session("ed");
    auto body = post("/sessions/" + s + "/run", {{"filter", {{"attributes", {{{"attr", "height"}, {"op", "="}, {"value", 1}}}}}}}, 400);
    REQUIRE(body["violations"].size() == 1);
    CHECK(body["violations"][0]["code"] == "bad-filter");
    body = post("/sessions/" + s + "/run", {{"filter", {{"sequence_length", {{"min", 5}, {"max", 1}}}}}}, 400);
    CHECK(body["violations"][0]["code"] == "bad-length");
    CHECK(get("/sessions/" + s)["state"] == "idle");
  }

  TEST_CASE("an age filter admits exactly the matching patients") {
    const auto s = new_session("ed");
    post("/sessions/" + s + "/run",
         {{"quantum_ms", 200}, {"filter", {{"attributes", {{{"attr", "age"}, {"op", ">="}, {"value", 65}}}}}}}, 202);
    const auto fs = frames(s);
    check_stream(fs);

    const auto m = load_valid_manifest(fixtures::data("manifests/ed.json"));
    auto params = synthesis_params_from_json(read_json_file(fixtures::data("synth/ed.json")), m);
    params.patient_count = kEdPatients;
    const SyntheticSource src(params, m);
    std::uint64_t want = 0;
    RawPatient p;
    for (std::size_t i = 0; i < src.size(); ++i) {
      src.fetch(i, p);
      want += p.attributes[0] >= 65;
    }
    CHECK(fs[fs.size() - 2]["tree"]["patients"] == want);
    CHECK(fs[fs.size() - 2]["processed"] == kEdPatients);
  }

  TEST_CASE("late and repeated subscribers get the latest snapshot") {
    const auto s = new_session("fig-ess");
    post("/sessions/" + s + "/run", json::object(), 202);
    const auto first = frames(s);
    check_stream(first);
    const auto again = frames(s);
    REQUIRE(again.size() == 2);
    CHECK(again[0]["version"] == first[first.size() - 2]["version"]);
    CHECK(again[0]["final"] == true);
    CHECK(again[1]["kind"] == "done");

    post("/sessions/" + s + "/run", json::object(), 202);
    const auto second = frames(s);
    check_stream(second);
    CHECK(second.front()["version"].get<std::uint64_t>() > first[first.size() - 2]["version"].get<std::uint64_t>());
  }

  TEST_CASE("an unknown session stream yields one error frame") {
    int status = 0;
    const auto fs = frames("nobody", &status);
    CHECK(status == 404);
    REQUIRE(fs.size() == 1);
    CHECK(fs[0]["kind"] == "error");
  }

  TEST_CASE("layout, distribution and history queries") {
    const auto s = new_session("fig-ess");
    get("/sessions/" + s + "/layout", 404);
    post("/sessions/" + s + "/run", json::object(), 202);
    frames(s);
    const auto layout = get("/sessions/" + s + "/layout?vw=400&vh=200&mode=uniform");
    REQUIRE(layout["rects"].size() == 5);
    CHECK(layout["rects"][0]["height"] == 200.0);
    CHECK(layout["rects"][2]["height"] == 100.0);
    get("/sessions/" + s + "/layout?mode=sideways", 400);
    get("/sessions/" + s + "/layout?vw=-3", 400);

    const auto dist = get("/sessions/" + s + "/distribution?path=a>b&selector=duration");
    CHECK(dist["count"] == 2);
    CHECK(get("/sessions/" + s + "/distribution?path=&selector=age")["bins"][0]["lower"] == 30);
    get("/sessions/" + s + "/distribution?path=a>zzz", 404);
    get("/sessions/" + s + "/distribution?path=a>e", 404);

    const auto history = get("/sessions/" + s + "/history");
    REQUIRE(history.size() == 1);
    CHECK_FALSE(history[0]["snapshot"].contains("tree"));
    CHECK(get("/sessions/" + s + "/history/1")["snapshot"]["tree"]["patients"] == 2);
    get("/sessions/" + s + "/history/7", 404);
    const auto diff = get("/sessions/" + s + "/history/1/diff/1");
    REQUIRE(diff["rows"].size() == 6);
    for (const auto& row : diff["rows"]) CHECK(row["delta_count"] == 0);
    CHECK(get("/sessions/" + s + "/layout?entry=1&mode=uniform")["rects"].size() == 5);
  }

  TEST_CASE("history diffs compare two filtered runs") {
    const auto s = new_session("fig-ess");
    post("/sessions/" + s + "/run", json::object(), 202);
    frames(s);
    post("/sessions/" + s + "/run", {{"filter", {{"hidden_types", {"c"}}}}}, 202);
    const auto fs = frames(s);
    CHECK(fs.back()["history_entry"] == 2);
    const auto diff = get("/sessions/" + s + "/history/1/diff/2");
    for (const auto& row : diff["rows"]) {
      if (row["names"] == json::array({"a", "b", "c"})) CHECK(row["delta_count"] == -1);
    }
    CHECK(std::filesystem::exists(fixture().dir / "history" / (s + ".jsonl")));
  }
}
