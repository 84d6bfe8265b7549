// Copyright 2026 The teeaudit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "teeaudit/harness.hpp"
#include "teeaudit/protocols.hpp"
#include "teeaudit/toy_model.hpp"
#include "teeaudit/translog.hpp"

namespace teeaudit::cli {
namespace {

namespace fs = std::filesystem;
using protocols::ProtocolError;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Bytes read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  return Bytes(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::string& path, ByteView data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("short write to " + path);
}

enum class Format { kText, kStructured };

struct Config {
  std::string log;
  std::string registry = "registry.json";
  std::string backend = std::string(SimulatedBackend::kDefaultId);
  Format format = Format::kText;
};

/// Structured mode prints `key=value` lines; free text values are JSON strings.
class Printer {
 public:
  Printer(std::ostream& out, Format f) : out_(out), format_(f) {}

  bool structured() const { return format_ == Format::kStructured; }
  void kv(std::string_view key, std::string_view value) {
    out_ << key << '=' << value << '\n';
  }
  void kv_text(std::string_view key, std::string_view value) {
    out_ << key << '=' << nlohmann::json(std::string(value)).dump() << '\n';
  }
  void line(std::string_view s) { out_ << s << '\n'; }
  void result(const harness::AuditResult& r) {
    std::istringstream lines(r.encode());
    for (std::string l; std::getline(lines, l);) {
      if (structured()) {
        out_ << "result." << l << '\n';
      } else {
        out_ << l << '\n';
      }
    }
  }
  std::ostream& raw() { return out_; }

 private:
  std::ostream& out_;
  Format format_;
};

TrustedRegistry load_registry(const std::string& path) {
  if (!fs::exists(path)) return {};
  return TrustedRegistry::from_json(teeaudit::to_string(read_file(path)));
}

void save_registry(const std::string& path, const TrustedRegistry& reg) {
  write_file(path, as_bytes(reg.to_json()));
}

std::string text_arg(const std::string& inline_text, const std::string& file) {
  if (!file.empty()) return teeaudit::to_string(read_file(file));
  return inline_text;
}

model::SamplingParams preset(const std::string& task) {
  if (task == "summarization") return model::SamplingParams::summarization();
  if (task == "classification") return model::SamplingParams::classification();
  if (task == "toxicity") return model::SamplingParams::toxicity();
  throw UsageError("unknown task " + task);
}

struct SamplingFlags {
  std::string task = "classification";
  std::optional<std::uint64_t> seed;
  std::optional<double> temp;
  std::optional<double> top_p;
  std::optional<std::uint32_t> n_len;
  std::optional<std::uint32_t> ctx;

  void add(CLI::App* c) {
    c->add_option("--task", task, "Sampling preset")
        ->check(CLI::IsMember({"classification", "summarization", "toxicity"}));
    c->add_option("--seed", seed, "Sampling seed");
    c->add_option("--temp", temp, "Temperature");
    c->add_option("--top-p", top_p, "Nucleus mass");
    c->add_option("--n-len", n_len, "Maximum output tokens");
    c->add_option("--ctx", ctx, "Context size");
  }
  model::SamplingParams params() const {
    auto p = preset(task);
    if (seed) p.seed = *seed;
    if (temp) p.temp = *temp;
    if (top_p) p.top_p = *top_p;
    if (n_len) p.n_len = *n_len;
    if (ctx) p.context_size = *ctx;
    return p;
  }
};

struct Enclave {
  Enclave(const Config& cfg, const std::string& image_path)
      : backend(cfg.backend),
        log(translog::open_log(cfg.log)),
        registry(load_registry(cfg.registry)),
        image(EnclaveImage::decode(read_file(image_path))) {}

  SimulatedBackend backend;
  std::unique_ptr<translog::LogStore> log;
  TrustedRegistry registry;
  EnclaveImage image;

  protocols::Setup setup() { return {backend, image, registry, *log}; }
};

std::unique_ptr<Enclave> enclave(const Config& cfg, const std::string& image_path) {
  return std::make_unique<Enclave>(cfg, image_path);
}

void print_pcrs(Printer& p, const PcrSet& pcrs) {
  p.kv("pcr0", pcrs.pcr0.hex());
  p.kv("pcr1", pcrs.pcr1.hex());
  p.kv("pcr2", pcrs.pcr2.hex());
}

constexpr std::string_view kReplayNote =
    "note: replay prevention and key rotation are not implemented; a disclosed "
    "triple stays valid for as long as the image is trusted";

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Attestable audits: run and verify model audits inside a trusted enclave.",
               "teeaudit"};
  app.require_subcommand(1);
  app.fallthrough();

  Config cfg;
  std::string format = "text";
  app.add_option("--log", cfg.log, "Log endpoint: host:port or file:<path> (default $AA_LOG_ADDR)");
  app.add_option("--registry", cfg.registry, "Trusted registry file")->capture_default_str();
  app.add_option("--backend", cfg.backend, "TEE backend id")->capture_default_str();
  app.add_option("--format", format, "Output format")
      ->check(CLI::IsMember({"text", "structured"}))
      ->capture_default_str();

  std::function<int(Printer&)> action;

  // Log operator ------------------------------------------------------------
  auto* log_cmd = app.add_subcommand("log", "Transparency log")->group("Log operator");
  log_cmd->require_subcommand(1);
  std::string log_path, listen = "127.0.0.1:0";
  auto* serve = log_cmd->add_subcommand("serve", "Serve a file-backed log over TCP");
  serve->add_option("--path", log_path, "Log file")->required();
  serve->add_option("--listen", listen, "host:port to bind")->capture_default_str();
  serve->callback([&] {
    action = [&](Printer& p) {
      translog::TransparencyLog log(log_path);
      auto ep = net::Endpoint::parse(listen);
      translog::LogService svc(log, ep);
      ep.port = svc.port();
      p.kv("listening", ep.str());
      p.raw().flush();
      svc.run();
      return kExitOk;
    };
  });
  auto* root = log_cmd->add_subcommand("root", "Print log size and Merkle root");
  root->callback([&] {
    action = [&](Printer& p) {
      auto log = translog::open_log(cfg.log);
      p.kv("size", std::to_string(log->size()));
      p.kv("root", log->root().hex());
      return kExitOk;
    };
  });
  std::uint64_t get_index = 0;
  auto* get = log_cmd->add_subcommand("get", "Print one log entry");
  get->add_option("index", get_index)->required();
  get->callback([&] {
    action = [&](Printer& p) {
      auto log = translog::open_log(cfg.log);
      const auto e = log->get(get_index);
      p.kv("index", std::to_string(e.index));
      p.kv("kind", std::string(translog::to_string(e.kind)));
      p.kv("leaf", e.leaf_hash.hex());
      p.kv("payload", base64_encode(e.payload));
      return kExitOk;
    };
  });

  // Image and registry ------------------------------------------------------
  auto* image_cmd = app.add_subcommand("image", "Enclave images")->group("Log operator");
  image_cmd->require_subcommand(1);
  std::string code_id = "teeaudit-enclave", config_file, image_out, image_path;
  auto* build_img = image_cmd->add_subcommand("build", "Write an image file");
  build_img->add_option("--code-id", code_id, "Code identifier")->capture_default_str();
  build_img->add_option("--config", config_file, "Configuration blob file");
  build_img->add_option("--out", image_out, "Output file")->required();
  build_img->callback([&] {
    action = [&](Printer& p) {
      EnclaveImage img{code_id, config_file.empty() ? Bytes{} : read_file(config_file)};
      write_file(image_out, img.encode());
      print_pcrs(p, measure_image(img, cfg.backend));
      return kExitOk;
    };
  });
  auto* measure = image_cmd->add_subcommand("measure", "Print the PCRs of an image");
  measure->add_option("--image", image_path, "Image file")->required();
  measure->callback([&] {
    action = [&](Printer& p) {
      const auto img = EnclaveImage::decode(read_file(image_path));
      print_pcrs(p, SimulatedBackend(cfg.backend).measure(img));
      return kExitOk;
    };
  });

  auto* reg_cmd = app.add_subcommand("registry", "Trusted images")->group("Log operator");
  reg_cmd->require_subcommand(1);
  auto* trust = reg_cmd->add_subcommand("trust", "Trust an image and publish its registration");
  trust->add_option("--image", image_path, "Image file")->required();
  trust->callback([&] {
    action = [&](Printer& p) {
      auto reg = load_registry(cfg.registry);
      auto log = translog::open_log(cfg.log);
      SimulatedBackend backend(cfg.backend);
      const auto img = EnclaveImage::decode(read_file(image_path));
      const auto index = protocols::register_image(*log, reg, img, backend);
      save_registry(cfg.registry, reg);
      p.kv("log_index", std::to_string(index));
      print_pcrs(p, backend.measure(img));
      return kExitOk;
    };
  });
  auto* revoke = reg_cmd->add_subcommand("revoke", "Revoke a trusted image");
  revoke->add_option("--image", image_path, "Image file")->required();
  revoke->callback([&] {
    action = [&](Printer& p) {
      auto reg = load_registry(cfg.registry);
      const auto img = EnclaveImage::decode(read_file(image_path));
      const auto pcrs = SimulatedBackend(cfg.backend).measure(img);
      try {
        reg.revoke(pcrs);
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      save_registry(cfg.registry, reg);
      p.kv("revoked", pcrs.pcr0.hex());
      return kExitOk;
    };
  });

  // Provider ----------------------------------------------------------------
  auto* model_cmd = app.add_subcommand("model", "Model artifacts")->group("Provider");
  model_cmd->require_subcommand(1);
  std::string model_path, model_out;
  std::uint64_t weight_seed = model::kToyWeightSeed;
  int bits = 8;
  auto* mbuild = model_cmd->add_subcommand("build", "Write the bundled toy model");
  mbuild->add_option("--seed", weight_seed, "Weight seed")->capture_default_str();
  mbuild->add_option("--out", model_out, "Output file")->required();
  mbuild->callback([&] {
    action = [&](Printer& p) {
      const auto bytes = model::serialize(model::build_toy_model(weight_seed));
      write_file(model_out, bytes);
      p.kv("model", crypto::hash(bytes).hex());
      return kExitOk;
    };
  });
  auto* mhash = model_cmd->add_subcommand("hash", "Digest of a model file");
  mhash->add_option("--model", model_path, "Model file")->required();
  mhash->callback([&] {
    action = [&](Printer& p) {
      const auto bytes = read_file(model_path);
      model::validate(model::load_model(bytes));
      p.kv("model", crypto::hash(bytes).hex());
      return kExitOk;
    };
  });
  auto* mquant = model_cmd->add_subcommand("quantize", "Quantize outside the enclave");
  mquant->add_option("--model", model_path, "f32 model file")->required();
  mquant->add_option("--bits", bits, "Bit width")->check(CLI::IsMember({2, 4, 8}))->required();
  mquant->add_option("--out", model_out, "Output file")->required();
  mquant->callback([&] {
    action = [&](Printer& p) {
      const auto q = model::serialize(model::quantize(model::load_model(read_file(model_path)), bits));
      write_file(model_out, q);
      p.kv("quantized", crypto::hash(q).hex());
      return kExitOk;
    };
  });

  std::string attestation_out;
  auto* prep = app.add_subcommand("prepare", "Quantize a model inside the enclave")->group("Provider");
  prep->add_option("--image", image_path, "Image file")->required();
  prep->add_option("--model", model_path, "f32 model file")->required();
  prep->add_option("--bits", bits, "Bit width")->check(CLI::IsMember({2, 4, 8}))->required();
  prep->add_option("--out", model_out, "Quantized model output")->required();
  prep->add_option("--attestation-out", attestation_out, "Attestation output");
  prep->callback([&] {
    action = [&](Printer& p) {
      auto e = enclave(cfg, image_path);
      auto setup = e->setup();
      const auto r = protocols::prepare(setup, read_file(model_path), bits);
      write_file(model_out, r.quantized_model);
      if (!attestation_out.empty()) write_file(attestation_out, r.attestation);
      p.kv("model", r.model_digest.hex());
      p.kv("quantized", r.quantized_digest.hex());
      p.kv("log_index", std::to_string(r.log_index));
      return kExitOk;
    };
  });

  std::string prompt, prompt_file, response_out;
  SamplingFlags sampling;
  auto* infer = app.add_subcommand("infer", "Serve one prompt from an audited model")->group("Provider");
  infer->add_option("--image", image_path, "Image file")->required();
  infer->add_option("--model", model_path, "Model file (M or M_q)")->required();
  infer->add_option("--prompt", prompt, "Prompt text");
  infer->add_option("--prompt-file", prompt_file, "Prompt file");
  infer->add_option("--response-out", response_out, "Response output");
  infer->add_option("--attestation-out", attestation_out, "Attestation output");
  sampling.add(infer);
  infer->callback([&] {
    action = [&](Printer& p) {
      auto e = enclave(cfg, image_path);
      auto setup = e->setup();
      protocols::InferenceRequest req;
      req.model = read_file(model_path);
      req.prompt = text_arg(prompt, prompt_file);
      req.params = sampling.params();
      const auto r = protocols::inference_session(setup, req);
      if (!response_out.empty()) write_file(response_out, as_bytes(r.response));
      if (!attestation_out.empty()) write_file(attestation_out, r.attestation);
      if (p.structured()) {
        p.kv_text("response", r.response);
        p.kv("output_tokens", std::to_string(r.record.output_tokens));
      } else {
        p.line(r.response);
      }
      p.kv("model", crypto::hash(req.model).hex());
      p.kv("result", r.result.hash().hex());
      return kExitOk;
    };
  });

  // Auditor -----------------------------------------------------------------
  auto* bundle_cmd = app.add_subcommand("bundle", "Audit bundles")->group("Auditor");
  bundle_cmd->require_subcommand(1);
  std::string template_name = "mmlu", data_path, bundle_out, bundle_path;
  bool lenient = false;
  std::optional<double> tox_threshold;
  auto* bbuild = bundle_cmd->add_subcommand("build", "Package audit code and a JSONL dataset");
  bbuild->add_option("--template", template_name, "Prompt template")
      ->check(CLI::IsMember({"mmlu", "xsum", "toxicchat"}))
      ->capture_default_str();
  bbuild->add_option("--data", data_path, "JSONL dataset")->required();
  bbuild->add_option("--out", bundle_out, "Output file")->required();
  bbuild->add_flag("--lenient", lenient, "Lenient answer parsing");
  bbuild->add_option("--toxicity-threshold", tox_threshold, "Classifier threshold");
  SamplingFlags bundle_sampling;
  bbuild->add_option("--seed", bundle_sampling.seed, "Sampling seed");
  bbuild->add_option("--n-len", bundle_sampling.n_len, "Maximum output tokens");
  bbuild->callback([&] {
    action = [&](Printer& p) {
      const auto t = *harness::parse_template_id(template_name);
      const auto type = t == harness::TemplateId::kMmlu   ? harness::BenchmarkType::kDiscreteLabel
                        : t == harness::TemplateId::kXSum ? harness::BenchmarkType::kTextSimilarity
                                                          : harness::BenchmarkType::kClassifierJudged;
      auto d = harness::CodeDescriptor::defaults_for(type);
      d.template_id = t;
      d.strict_choice = !lenient;
      if (tox_threshold) d.toxicity_threshold = *tox_threshold;
      if (bundle_sampling.seed) d.sampling.seed = *bundle_sampling.seed;
      if (bundle_sampling.n_len) d.sampling.n_len = *bundle_sampling.n_len;
      const auto records = harness::import_jsonl(teeaudit::to_string(read_file(data_path)), t);
      const auto bytes = harness::package_audit(d, records);
      write_file(bundle_out, bytes);
      p.kv("audit", crypto::hash(bytes).hex());
      p.kv("records", std::to_string(records.size()));
      return kExitOk;
    };
  });

  std::string result_out;
  auto* audit = app.add_subcommand("audit", "Run an audit bundle inside the enclave")->group("Auditor");
  audit->add_option("--image", image_path, "Image file")->required();
  audit->add_option("--model", model_path, "Model file")->required();
  audit->add_option("--bundle", bundle_path, "Audit bundle")->required();
  audit->add_option("--result-out", result_out, "R output");
  audit->add_option("--attestation-out", attestation_out, "Attestation output");
  audit->callback([&] {
    action = [&](Printer& p) {
      auto e = enclave(cfg, image_path);
      auto setup = e->setup();
      const auto r = protocols::attestable_audit(setup, read_file(model_path), read_file(bundle_path));
      if (!result_out.empty()) write_file(result_out, r.result_bytes);
      if (!attestation_out.empty()) write_file(attestation_out, r.attestation);
      p.result(r.result);
      p.kv("result_index", std::to_string(r.result_index));
      p.kv("attestation_index", std::to_string(r.attestation_index));
      return kExitOk;
    };
  });

  // User and regulator --------------------------------------------------------
  std::string response_text, response_file, attestation_path;
  auto disclosure = [&](CLI::App* c) {
    c->add_option("--prompt", prompt, "Prompt text");
    c->add_option("--prompt-file", prompt_file, "Prompt file");
    c->add_option("--response", response_text, "Response text");
    c->add_option("--response-file", response_file, "Response file");
    c->add_option("--attestation", attestation_path, "Attestation document")->required();
  };
  auto* verify = app.add_subcommand("verify", "Check a reply against the log")->group("User");
  disclosure(verify);
  verify->callback([&] {
    action = [&](Printer& p) {
      auto log = translog::open_log(cfg.log);
      const auto reg = load_registry(cfg.registry);
      const auto v = protocols::user_verify(text_arg(prompt, prompt_file),
                                            text_arg(response_text, response_file),
                                            read_file(attestation_path), *log, reg);
      p.kv("verdict", v.headline());
      if (!v.detail.empty()) p.kv_text("detail", v.detail);
      if (v.chain) p.result(v.chain->r);
      return v.verified ? kExitOk : kExitRejected;
    };
  });

  protocols::RegulatorPolicy policy;
  auto* reg_check =
      app.add_subcommand("regulator-check", "Inspect a disclosed reply and its audit chain")
          ->group("Regulator");
  disclosure(reg_check);
  reg_check->add_option("--min-accuracy", policy.min_accuracy, "Flag accuracy below this");
  reg_check->add_option("--min-similarity", policy.min_similarity, "Flag similarity below this");
  reg_check->add_option("--max-toxic-rate", policy.max_toxic_rate, "Flag toxicity above this");
  reg_check->callback([&] {
    action = [&](Printer& p) {
      auto log = translog::open_log(cfg.log);
      const auto reg = load_registry(cfg.registry);
      const auto rep = protocols::regulator_check(text_arg(prompt, prompt_file),
                                                  text_arg(response_text, response_file),
                                                  read_file(attestation_path), *log, reg, policy);
      if (p.structured()) {
        p.kv("verdict", rep.verdict.headline());
        if (const auto& c = rep.verdict.chain) {
          p.kv("model", c->model.hex());
          if (c->quantized) p.kv("quantized", c->quantized->hex());
          p.kv("audit", c->audit.hex());
          p.kv("result", c->result.hex());
          if (c->prepare_entry) p.kv("prepare_index", std::to_string(c->prepare_entry->index));
          p.kv("audit_index", std::to_string(c->audit_entry.index));
          p.kv("result_index", std::to_string(c->result_entry.index));
          p.result(c->r);
          p.kv("audit_deficit", rep.audit_deficit ? "yes" : "no");
          if (rep.audit_deficit) p.kv_text("deficit", rep.deficit);
        }
        p.kv_text("note", kReplayNote);
      } else {
        p.raw() << rep.render();
        p.line(kReplayNote);
      }
      return rep.verdict.verified ? kExitOk : kExitRejected;
    };
  });

  // Reports -------------------------------------------------------------------
  auto* report = app.add_subcommand("report", "Measurement reports")->group("Reports");
  report->require_subcommand(1);
  std::string result_path;
  auto* tokens = report->add_subcommand("tokens", "Output-length distribution and throughput");
  tokens->add_option("--result", result_path, "R file (histogram only)");
  tokens->add_option("--model", model_path, "Model file");
  tokens->add_option("--bundle", bundle_path, "Audit bundle");
  tokens->callback([&] {
    action = [&](Printer& p) {
      harness::TokenStats stats;
      if (!result_path.empty()) {
        const auto r = harness::AuditResult::decode(teeaudit::to_string(read_file(result_path)));
        stats.histogram = r.token_histogram;
        for (const auto& [n, c] : r.token_histogram) {
          stats.records += c;
          stats.output_tokens += n * c;
        }
      } else if (!model_path.empty() && !bundle_path.empty()) {
        const auto m = model::load_model(read_file(model_path));
        const auto b = harness::AuditBundle::decode(read_file(bundle_path));
        const model::Runtime rt(m);
        std::vector<model::GenerationRecord> recs;
        for (const auto& item : b.dataset) {
          recs.push_back(model::generate_text(rt, harness::assemble_prompt(b.descriptor, item),
                                              b.descriptor.sampling));
        }
        stats = harness::token_stats(recs);
      } else {
        throw UsageError("report tokens needs --result, or --model and --bundle");
      }
      if (p.structured()) {
        p.kv("records", std::to_string(stats.records));
        p.kv("output_tokens", std::to_string(stats.output_tokens));
        for (const auto& [n, c] : stats.histogram) p.kv("hist." + std::to_string(n), std::to_string(c));
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", stats.tokens_per_second());
        p.kv("tokens_per_second", buf);
      } else {
        p.raw() << stats.render();
      }
      return kExitOk;
    };
  });

  try {
    app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }
  cfg.format = format == "structured" ? Format::kStructured : Format::kText;
  Printer printer(out, cfg.format);
  if (!action) {
    err << app.help();
    return kExitUsage;
  }
  try {
    return action(printer);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ProtocolError& e) {
    err << "protocol failure: " << protocols::to_string(e.failure()) << ": " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace teeaudit::cli
