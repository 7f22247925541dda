#include "commands.hpp"

#include <iholo/error.hpp>
#include <iholo/events.hpp>

#include <fstream>
#include <iostream>

namespace iholo::cli {
namespace {

std::ifstream open_stream(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path);
  return in;
}

} // namespace

void register_events(CLI::App &app, const GlobalOptions &) {
  auto *cmd = app.add_subcommand("events", "Inspect or convert event streams");
  cmd->require_subcommand(1);

  auto inspect_path = std::make_shared<std::string>();
  auto *inspect = cmd->add_subcommand("inspect", "Print the header and per-channel counts");
  inspect->add_option("stream", *inspect_path, "Event stream (.iih)")->required();
  inspect->callback([inspect_path] {
    auto in = open_stream(*inspect_path);
    print_json(events::to_json(events::summarize(in)));
  });

  struct ExportArgs {
    std::string stream;
    std::string out;
  };
  auto ex = std::make_shared<ExportArgs>();
  auto *exp = cmd->add_subcommand("export-csv", "Write channel,x,y,t_ps rows");
  exp->add_option("stream", ex->stream, "Event stream (.iih)")->required();
  exp->add_option("-o,--out", ex->out, "CSV path (default stdout)");
  exp->callback([ex] {
    events::EventStream s = events::read_stream_file(ex->stream);
    if (ex->out.empty()) {
      events::export_csv(s, std::cout);
      return;
    }
    ensure_parent(ex->out);
    std::ofstream out(ex->out);
    if (!out) throw io_error("cannot create " + ex->out);
    events::export_csv(s, out);
    if (!out) throw io_error("failed to write " + ex->out);
  });
}

void register_manifest(CLI::App &app, const GlobalOptions &) {
  auto *cmd = app.add_subcommand("manifest", "Run manifests");
  cmd->require_subcommand(1);
  auto path = std::make_shared<std::string>();
  auto *verify = cmd->add_subcommand("verify", "Check recorded digests against the files on disk");
  verify->add_option("manifest", *path, "Manifest JSON")->required();
  verify->callback([path] {
    VerifyResult r = verify_manifest(*path);
    print_json({{"checked", r.checked}, {"missing", r.missing}, {"mismatched", r.mismatched}});
    if (!r.missing.empty()) throw io_error("manifest outputs are missing");
    if (!r.mismatched.empty()) throw Error(ErrorKind::format, "manifest digests do not match");
  });
}

} // namespace iholo::cli
