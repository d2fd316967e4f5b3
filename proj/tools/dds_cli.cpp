/*
 * Copyright 2026 The DDS Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// dds command-line client.
//
// Exit codes: 0 success, 1 validation or usage error, 2 transport or
// authentication error, 3 unknown id.

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "dds/dds.h"
#include "json.hpp"

namespace {

using Json = nlohmann::json;

enum Exit { kOk = 0, kInvalid = 1, kTransport = 2, kUnknownId = 3 };

struct Failure {
  int code;
  std::string message;
};

struct CliConfig {
  std::string server_url = "http://127.0.0.1:8080";
  std::string token_path;
  std::string output_format = "table";
};

struct Globals {
  std::string config_path;
  std::string server;
  std::string token_file;
  std::string format;
};

std::string read_file(const std::string& path) {
  if (path == "-") {
    std::stringstream ss;
    ss << std::cin.rdbuf();
    return ss.str();
  }
  std::ifstream in(path);
  if (!in) throw Failure{kInvalid, "cannot read " + path};
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Failure{kInvalid, "cannot write " + path};
  out << text;
}

int exit_for(dds_status s) {
  switch (s) {
    case DDS_OK: return kOk;
    case DDS_E_UNAVAILABLE:
    case DDS_E_UNAUTHORIZED: return kTransport;
    case DDS_E_NOT_FOUND: return kUnknownId;
    default: return kInvalid;
  }
}

void check(dds_status s) {
  if (s != DDS_OK) throw Failure{exit_for(s), std::string(dds_status_name(s)) + ": " + dds_last_error()};
}

std::string take(char* p) {
  std::string s = p ? p : "";
  dds_free(p);
  return s;
}

CliConfig load_config(const Globals& g) {
  CliConfig c;
  if (!g.config_path.empty()) {
    const Json j = Json::parse(read_file(g.config_path), nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Failure{kInvalid, "config: expected a JSON object"};
    for (const auto& [k, v] : j.items()) {
      if (!v.is_string()) throw Failure{kInvalid, "config: " + k + " must be a string"};
      if (k == "server_url") {
        c.server_url = v;
      } else if (k == "token_path") {
        c.token_path = v;
      } else if (k == "output_format") {
        c.output_format = v;
      } else {
        throw Failure{kInvalid, "config: unknown field " + k};
      }
    }
  }
  if (const char* env = std::getenv("DDS_SERVER"); env && *env) c.server_url = env;
  if (!g.server.empty()) c.server_url = g.server;
  if (!g.token_file.empty()) c.token_path = g.token_file;
  if (!g.format.empty()) c.output_format = g.format;
  if (c.output_format != "table" && c.output_format != "json" && c.output_format != "csv") {
    throw Failure{kInvalid, "output format must be table, json or csv"};
  }
  return c;
}

// First field of the first non-comment line.
std::string read_token(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Failure{kTransport, "cannot read token file " + path};
  std::string line;
  while (std::getline(in, line)) {
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    std::istringstream f(line);
    std::string token;
    if (f >> token) return token;
  }
  throw Failure{kTransport, "token file " + path + " is empty"};
}

class Client {
 public:
  explicit Client(const CliConfig& c) {
    const std::string token = c.token_path.empty() ? "" : read_token(c.token_path);
    dds_status s = dds_client_open(c.server_url.c_str(), token.c_str(), &client_);
    if (s == DDS_E_INVALID_ARGUMENT) throw Failure{kInvalid, dds_last_error()};
    check(s);
  }
  ~Client() { dds_client_close(client_); }

  std::pair<int, std::string> call(const std::string& method, const std::string& path,
                                   const std::string& body = {}, const std::string& key = {}) {
    int status = 0;
    char* out = nullptr;
    check(dds_client_call(client_, method.c_str(), path.c_str(), body.empty() ? nullptr : body.c_str(),
                          key.empty() ? nullptr : key.c_str(), &status, &out));
    return {status, take(out)};
  }

  // GET expecting 200; maps HTTP errors to exit codes.
  Json get(const std::string& path) {
    auto [status, body] = call("GET", path);
    if (status == 200) return Json::parse(body);
    throw http_failure(status, body);
  }

  static Failure http_failure(int status, const std::string& body) {
    std::string message = body;
    const Json j = Json::parse(body, nullptr, false);
    if (!j.is_discarded() && j.is_object() && j.contains("message")) message = j["message"];
    if (status == 401) return {kTransport, "unauthorized: " + message};
    if (status == 404) return {kUnknownId, "not found: " + message};
    if (status == 400 || status == 409) return {kInvalid, message};
    return {kTransport, "server returned " + std::to_string(status) + ": " + message};
  }

 private:
  dds_client* client_ = nullptr;
};

std::string encode(const std::string& s) {
  static const char* hex = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~' || c == '/') {
      out += static_cast<char>(c);
    } else {
      out += '%';
      out += hex[c >> 4];
      out += hex[c & 15];
    }
  }
  return out;
}

std::string csv_field(const std::string& v) {
  if (v.find_first_of(",\"\r\n") == std::string::npos) return v;
  std::string out = "\"";
  for (char c : v) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string cell(const Json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_null()) return "";
  return v.dump();
}

void render(const CliConfig& c, const std::vector<std::string>& columns, const Json& rows) {
  if (c.output_format == "json") {
    std::cout << rows.dump(2) << "\n";
    return;
  }
  if (c.output_format == "csv") {
    for (std::size_t i = 0; i < columns.size(); ++i) std::cout << (i ? "," : "") << csv_field(columns[i]);
    std::cout << "\r\n";
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < columns.size(); ++i) {
        std::cout << (i ? "," : "") << csv_field(cell(r.value(columns[i], Json())));
      }
      std::cout << "\r\n";
    }
    return;
  }
  std::vector<std::size_t> width;
  for (const auto& col : columns) width.push_back(col.size());
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      width[i] = std::max(width[i], cell(r.value(columns[i], Json())).size());
    }
  }
  for (std::size_t i = 0; i < columns.size(); ++i) {
    std::cout << std::left << std::setw(static_cast<int>(width[i]) + 2) << columns[i];
  }
  std::cout << "\n";
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      std::cout << std::left << std::setw(static_cast<int>(width[i]) + 2) << cell(r.value(columns[i], Json()));
    }
    std::cout << "\n";
  }
}

bool terminal(const std::string& status) {
  return status == "Finished" || status == "SubFinished" || status == "Failed";
}

void print_status(const CliConfig& c, const Json& s) {
  if (c.output_format == "json") {
    std::cout << s.dump(2) << "\n";
    return;
  }
  if (c.output_format == "table") {
    std::cout << "request " << cell(s["request_id"]) << "  status " << cell(s["status"])
              << "  works " << cell(s["works"]["total"]);
    if (s.value("degraded", false)) std::cout << "  (degraded)";
    std::cout << "\n";
  }
  Json rows = Json::array();
  for (const auto& w : s["work_list"]) rows.push_back(w);
  render(c, {"work_id", "template", "status", "generation"}, rows);
}

int cmd_submit(const CliConfig& c, const std::string& file, const std::string& key) {
  const std::string text = read_file(file);
  char* wire = nullptr;
  const dds_status s = dds_expand_request(text.c_str(), &wire);
  if (s != DDS_OK) throw Failure{kInvalid, std::string(dds_status_name(s)) + ": " + dds_last_error()};
  const std::string request = take(wire);
  char* report = nullptr;
  check(dds_wire_validate(request.c_str(), &report));
  const Json violations = Json::parse(take(report));
  if (!violations.empty()) {
    std::cerr << "validation failed:\n" << violations.dump(2) << "\n";
    return kInvalid;
  }
  Client client(c);
  auto [status, body] = client.call("POST", "/requests", request, key);
  if (status != 200 && status != 201) {
    if (status == 400) std::cerr << body << "\n";
    throw Client::http_failure(status, body);
  }
  const Json j = Json::parse(body);
  if (c.output_format == "json") {
    std::cout << j.dump() << "\n";
  } else {
    std::cout << j["request_id"].get<std::string>() << "\n";
  }
  return kOk;
}

int cmd_status(const CliConfig& c, const std::string& id, bool watch, double interval) {
  Client client(c);
  std::string last;
  for (;;) {
    const Json s = client.get("/requests/" + encode(id));
    const std::string status = s["status"];
    if (!watch || status != last) print_status(c, s);
    if (!watch || terminal(status)) return kOk;
    last = status;
    std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<long>(interval * 1000)));
  }
}

Json fetch_all(Client& client, const std::string& path, const std::string& filter, std::size_t page) {
  Json items = Json::array();
  std::string cursor;
  for (;;) {
    std::string url = path + "?page_size=" + std::to_string(page) + filter;
    if (!cursor.empty()) url += "&cursor=" + encode(cursor);
    const Json p = client.get(url);
    for (const auto& i : p["items"]) items.push_back(i);
    if (p["next_cursor"].is_null()) return items;
    cursor = p["next_cursor"];
  }
}

int cmd_collections(const CliConfig& c, const std::string& id, std::size_t page) {
  Client client(c);
  const Json rows = fetch_all(client, "/requests/" + encode(id) + "/collections", "", page);
  render(c, {"collection_id", "kind", "name", "total_contents", "available_contents", "processed_contents"}, rows);
  return kOk;
}

int cmd_contents(const CliConfig& c, const std::string& id, const std::string& status,
                 const std::string& kind, std::size_t page) {
  Client client(c);
  const std::string kind_filter = kind.empty() ? "" : "&kind=" + kind;
  const Json colls = fetch_all(client, "/requests/" + encode(id) + "/collections", kind_filter, page);
  Json rows = Json::array();
  const std::string filter = status.empty() ? "" : "&status=" + status;
  for (const auto& coll : colls) {
    const std::string cid = coll["collection_id"];
    for (const auto& row : fetch_all(client, "/collections/" + encode(cid) + "/contents", filter, page)) {
      rows.push_back(row);
    }
  }
  render(c, {"content_id", "name", "status", "attempt_count", "size_bytes"}, rows);
  return kOk;
}

int cmd_metrics(const CliConfig& c) {
  Client client(c);
  auto [status, body] = client.call("GET", "/metrics");
  if (status != 200) throw Client::http_failure(status, body);
  std::cout << body;
  return kOk;
}

int cmd_serve(const std::string& deployment, const std::string& host, int port) {
  const std::string text = deployment.empty() ? "" : read_file(deployment);
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);
  dds_server* server = nullptr;
  check(dds_server_create(text.empty() ? nullptr : text.c_str(), &server));
  int bound = 0;
  const dds_status s = dds_server_listen(server, host.c_str(), port, &bound);
  if (s != DDS_OK) {
    const std::string err = dds_last_error();
    dds_server_destroy(server);
    throw Failure{kTransport, err};
  }
  std::cout << "listening on http://" << host << ":" << bound << std::endl;
  int sig = 0;
  sigwait(&signals, &sig);
  dds_server_destroy(server);
  return kOk;
}

void write_outputs(const Json& result, const std::string& out, const std::string& hist,
                   const std::string& series) {
  if (!out.empty()) write_file(out, result["metrics_csv"]);
  if (!hist.empty()) write_file(hist, result["histogram_csv"]);
  if (!series.empty()) write_file(series, result["series_csv"]);
}

void print_carousel(const CliConfig& c, const Json& result) {
  if (c.output_format == "csv") {
    std::cout << result["metrics_csv"].get<std::string>();
    return;
  }
  render(c, {"policy", "status", "jobs", "mean_attempts", "peak_disk_bytes", "disk_byte_seconds",
             "makespan_ms", "peak_ratio"},
         result["rows"]);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dds: submit and inspect data delivery workflows"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "client config file (JSON)");
  app.add_option("--server", g.server, "head service URL (overrides DDS_SERVER)");
  app.add_option("--token-file", g.token_file, "bearer token file");
  app.add_option("--format", g.format, "table, json or csv");

  std::string file = "-";
  std::string key;
  auto* submit = app.add_subcommand("submit", "submit a workflow request or use-case shorthand");
  submit->add_option("file", file, "request document, '-' for stdin");
  submit->add_option("--idempotency-key", key);

  std::string id;
  bool watch = false;
  double interval = 1.0;
  auto* status = app.add_subcommand("status", "show a request and its works");
  status->add_option("request_id", id)->required();
  status->add_flag("--watch", watch, "poll until the request is terminal");
  status->add_option("--interval", interval, "seconds between polls")->check(CLI::PositiveNumber);

  std::size_t page = 100;
  auto* collections = app.add_subcommand("collections", "list a request's collections");
  collections->add_option("request_id", id)->required();
  collections->add_option("--page-size", page)->check(CLI::Range(1, 1000));

  std::string content_status;
  std::string kind;
  auto* contents = app.add_subcommand("contents", "list the contents of a request");
  contents->add_option("request_id", id)->required();
  contents->add_option("--status", content_status, "comma-separated content statuses");
  contents->add_option("--kind", kind, "Input or Output")->check(CLI::IsMember({"Input", "Output"}));
  contents->add_option("--page-size", page)->check(CLI::Range(1, 1000));

  auto* metrics = app.add_subcommand("metrics", "print the service counters");

  std::string deployment;
  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "run the head service and daemons");
  serve->add_option("--deployment", deployment, "deployment file (JSON)");
  serve->add_option("--host", host);
  serve->add_option("--port", port)->check(CLI::Range(0, 65535));

  std::string scenario;
  std::string policy = "file-level";
  std::string policies = "file-level,dataset-level";
  std::string out;
  std::string hist;
  std::string series;
  auto* carousel = app.add_subcommand("carousel", "data carousel scenarios");
  carousel->require_subcommand(1);
  carousel->fallthrough();
  auto* carousel_run = carousel->add_subcommand("run", "run one policy on a scenario");
  carousel_run->add_option("--scenario", scenario)->required();
  carousel_run->add_option("--policy", policy)->check(CLI::IsMember({"file-level", "dataset-level"}));
  carousel_run->add_option("--out", out, "metrics CSV");
  carousel_run->add_option("--histogram", hist, "attempts histogram CSV");
  carousel_run->add_option("--series", series, "disk occupancy CSV");
  auto* carousel_compare = carousel->add_subcommand("compare", "compare policies on a scenario");
  carousel_compare->add_option("--scenario", scenario)->required();
  carousel_compare->add_option("--policies", policies);
  carousel_compare->add_option("--out", out, "comparison CSV");
  carousel_compare->add_option("--histogram", hist, "attempts histogram CSV");
  carousel_compare->add_option("--series", series, "disk occupancy CSV");

  std::string task;
  std::string hpo_options;
  auto* hpo = app.add_subcommand("hpo", "hyperparameter optimization");
  hpo->require_subcommand(1);
  hpo->fallthrough();
  auto* hpo_run = hpo->add_subcommand("run", "run a task against the simulated evaluator");
  hpo_run->add_option("--task", task)->required();
  hpo_run->add_option("--options", hpo_options, "evaluator options JSON file");
  hpo_run->add_option("--out", out, "result JSON");

  std::string graph;
  std::string name = "dag";
  auto* dag = app.add_subcommand("dag", "job graphs");
  dag->require_subcommand(1);
  dag->fallthrough();
  auto* dag_ingest = dag->add_subcommand("ingest", "turn a job graph into a request document");
  dag_ingest->add_option("--graph", graph)->required();
  dag_ingest->add_option("--name", name);

  auto* expand = app.add_subcommand("expand", "print the request document a shorthand expands to");
  expand->add_option("file", file, "document, '-' for stdin");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInvalid;
  }

  try {
    const CliConfig config = load_config(g);
    if (submit->parsed()) return cmd_submit(config, file, key);
    if (status->parsed()) return cmd_status(config, id, watch, interval);
    if (collections->parsed()) return cmd_collections(config, id, page);
    if (contents->parsed()) return cmd_contents(config, id, content_status, kind, page);
    if (metrics->parsed()) return cmd_metrics(config);
    if (serve->parsed()) return cmd_serve(deployment, host, port);
    if (carousel_run->parsed() || carousel_compare->parsed()) {
      const std::string text = read_file(scenario);
      char* result = nullptr;
      if (carousel_run->parsed()) {
        check(dds_carousel_run(text.c_str(), policy.c_str(), &result));
      } else {
        check(dds_carousel_compare(text.c_str(), policies.c_str(), &result));
      }
      const Json r = Json::parse(take(result));
      write_outputs(r, out, hist, series);
      print_carousel(config, r);
      return kOk;
    }
    if (hpo_run->parsed()) {
      const std::string text = read_file(task);
      const std::string opts = hpo_options.empty() ? "" : read_file(hpo_options);
      char* result = nullptr;
      check(dds_hpo_run(text.c_str(), opts.empty() ? nullptr : opts.c_str(), &result));
      const Json r = Json::parse(take(result));
      if (!out.empty()) write_file(out, r.dump(2) + "\n");
      if (config.output_format == "table") {
        std::cout << "status " << cell(r["status"]) << "  evaluations " << cell(r["evaluations"])
                  << "  best_loss " << cell(r["best_loss"]) << "\n";
        if (!r["best_point"].is_null()) std::cout << "best " << r["best_point"]["values"].dump() << "\n";
      } else {
        Json brief = r;
        brief.erase("trace");
        std::cout << brief.dump(2) << "\n";
      }
      return kOk;
    }
    if (dag_ingest->parsed()) {
      const std::string text = read_file(graph);
      char* wire = nullptr;
      check(dds_dag_ingest(text.c_str(), name.c_str(), &wire));
      std::cout << take(wire) << "\n";
      return kOk;
    }
    if (expand->parsed()) {
      const std::string text = read_file(file);
      char* wire = nullptr;
      check(dds_expand_request(text.c_str(), &wire));
      std::cout << take(wire) << "\n";
      return kOk;
    }
  } catch (const Failure& f) {
    std::cerr << "dds: " << f.message << "\n";
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "dds: " << e.what() << "\n";
    return kInvalid;
  }
  return kInvalid;
}
