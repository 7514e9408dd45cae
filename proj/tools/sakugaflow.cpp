// Command-line entry point: run session scripts, export trees, serve the API.

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include "sakugaflow/api_server.hpp"
#include "sakugaflow/script.hpp"

namespace sf = sakugaflow;

namespace {

struct BackendFlags {
  std::string kind = "mock";
  std::string endpoint;
};

std::shared_ptr<sf::Backend> make_backend(const BackendFlags& flags) {
  if (flags.kind == "mock") return std::make_shared<sf::MockBackend>();
  if (flags.endpoint.empty()) throw std::runtime_error("--backend remote needs --backend-endpoint");
  sf::RemoteBackendOptions o;
  o.endpoint = flags.endpoint;
  return std::make_shared<sf::RemoteDiffusionBackend>(o);
}

void add_backend_flags(CLI::App* cmd, BackendFlags& flags) {
  cmd->add_option("--backend", flags.kind, "Generation backend")
      ->check(CLI::IsMember({"mock", "remote"}))
      ->envname("SAKUGAFLOW_BACKEND");
  cmd->add_option("--backend-endpoint", flags.endpoint, "Base URL of the remote diffusion server")
      ->envname("SAKUGAFLOW_BACKEND_ENDPOINT");
}

int run_command(const std::string& script_path, const std::string& out, const BackendFlags& backend,
                const std::string& data_dir, std::uint64_t seed, bool no_cache,
                const std::string& tutor_endpoint, bool tutor_fallback) {
  std::ifstream in(script_path, std::ios::binary);
  if (!in) {
    std::cerr << script_path << ": cannot open\n";
    return 2;
  }
  std::stringstream text;
  text << in.rdbuf();

  std::vector<sf::ScriptCommand> commands;
  try {
    commands = sf::parse_script(text.str());
  } catch (const sf::ScriptError& e) {
    std::cerr << script_path << ":" << e.line() << ":" << e.column() << ": " << e.what() << "\n";
    return 2;
  }

  sf::ScriptOptions o;
  if (!data_dir.empty()) o.data_dir = data_dir;
  o.id_seed = seed;
  o.backend = make_backend(backend);
  o.cache_enabled = !no_cache;
  o.base_dir = std::filesystem::path(script_path).parent_path();
  if (o.base_dir.empty()) o.base_dir = ".";
  if (!tutor_endpoint.empty()) o.tutor_endpoint = tutor_endpoint;
  o.tutor_fallback = tutor_fallback;
  o.log = &std::cout;

  auto result = sf::run_script(commands, out, o);
  if (result.exit_code != 0) std::cerr << script_path << ": " << result.error << "\n";
  return result.exit_code;
}

int serve_command(const std::string& listen, const std::string& data_dir, const BackendFlags& backend,
                  unsigned parallel_jobs, const std::string& tutor_endpoint, bool tutor_fallback,
                  const std::string& cors_origin, const std::string& static_dir) {
  auto colon = listen.rfind(':');
  if (colon == std::string::npos) throw std::runtime_error("--listen must be host:port");
  const std::string host = listen.substr(0, colon);
  const int port = std::stoi(listen.substr(colon + 1));

  // Block termination signals before any thread starts; main waits for them below.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  sf::EngineOptions eo;
  eo.data_dir = data_dir;
  eo.parallel_jobs = parallel_jobs;
  sf::Engine engine(eo, make_backend(backend));
  for (const auto& [dir, why] : engine.load_errors())
    std::cerr << "sakugaflow: skipped project " << dir << ": " << why << "\n";

  sf::TutorOptions to;
  if (!tutor_endpoint.empty()) to.endpoint = tutor_endpoint;
  to.fallback = tutor_fallback;
  sf::TutorService tutor(engine, to);

  sf::ApiOptions ao;
  ao.cors_origin = cors_origin;
  if (!static_dir.empty()) ao.static_dir = static_dir;
  sf::ApiServer server(engine, tutor, ao);
  const int bound = server.start(host, port);
  if (bound < 0) {
    std::cerr << "sakugaflow: cannot listen on " << listen << "\n";
    return 1;
  }
  std::cout << "sakugaflow: serving " << engine.projects().size() << " project(s) on http://" << host
            << ":" << bound << std::endl;

  int sig = 0;
  sigwait(&signals, &sig);
  std::cout << "sakugaflow: shutting down" << std::endl;
  engine.shutdown();
  server.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sakugaflow: staged illustration workflow engine"};
  app.require_subcommand(1);

  std::string tutor_endpoint;
  std::string tutor_fallback = "on";
  auto add_tutor_flags = [&](CLI::App* cmd) {
    cmd->add_option("--tutor-endpoint", tutor_endpoint, "Base URL of the chat tutor")
        ->envname("SAKUGAFLOW_TUTOR_ENDPOINT");
    cmd->add_option("--tutor-fallback", tutor_fallback, "Answer offline when the remote tutor fails")
        ->check(CLI::IsMember({"on", "off"}))
        ->envname("SAKUGAFLOW_TUTOR_FALLBACK");
  };

  // run
  auto* run = app.add_subcommand("run", "Execute a session script");
  std::string script_path, out_dir, run_data_dir;
  std::uint64_t seed = 1;
  bool no_cache = false;
  BackendFlags run_backend;
  run->add_option("script", script_path, "Script file")->required();
  run->add_option("--out", out_dir, "Artifact directory")->required();
  run->add_option("--data-dir", run_data_dir, "Keep the session's project store here");
  run->add_option("--seed", seed, "Seed for project ids and unseeded regenerations");
  run->add_flag("--no-cache", no_cache, "Disable the generation result cache");
  add_backend_flags(run, run_backend);
  add_tutor_flags(run);

  // export
  auto* exp = app.add_subcommand("export", "Print the version tree of a project directory");
  std::string project_dir;
  exp->add_option("project-dir", project_dir, "Directory holding events.log")->required();

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  std::string listen = "127.0.0.1:8080", serve_data_dir = "./sakugaflow-data", cors_origin = "*",
              static_dir;
  unsigned parallel_jobs = 2;
  BackendFlags serve_backend;
  serve->add_option("--listen", listen, "host:port")->envname("SAKUGAFLOW_LISTEN");
  serve->add_option("--data-dir", serve_data_dir, "Project store root")->envname("SAKUGAFLOW_DATA_DIR");
  serve->add_option("--parallel-jobs", parallel_jobs, "Concurrent generation jobs")
      ->check(CLI::Range(1u, 64u))
      ->envname("SAKUGAFLOW_PARALLEL_JOBS");
  serve->add_option("--cors-origin", cors_origin, "Access-Control-Allow-Origin value; empty disables")
      ->envname("SAKUGAFLOW_CORS_ORIGIN");
  serve->add_option("--static-dir", static_dir, "Serve UI assets from this directory");
  add_backend_flags(serve, serve_backend);
  add_tutor_flags(serve);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run)
      return run_command(script_path, out_dir, run_backend, run_data_dir, seed, no_cache, tutor_endpoint,
                         tutor_fallback == "on");
    if (*exp) {
      std::cout << sf::export_tree(std::filesystem::path(project_dir)).dump(2) << "\n";
      return 0;
    }
    return serve_command(listen, serve_data_dir, serve_backend, parallel_jobs, tutor_endpoint,
                         tutor_fallback == "on", cors_origin, static_dir);
  } catch (const std::exception& e) {
    std::cerr << "sakugaflow: " << e.what() << "\n";
    return 1;
  }
}
