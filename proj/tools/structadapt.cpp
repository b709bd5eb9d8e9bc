// structadapt command-line tool: graph utilities, pretraining, training,
// decoding, evaluation and the experiment sweeps.
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "structadapt/experiments.hpp"

namespace fs = std::filesystem;
using namespace structadapt;
using experiments::Arm;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::istringstream is(read_file(path));
  std::vector<std::string> out;
  for (std::string line; std::getline(is, line);) out.push_back(line);
  return out;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::size_t> parse_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(s)) out.push_back(std::stoul(item));
  return out;
}

void log_line(const std::string& msg) { std::cerr << msg << std::endl; }

// Shared --config / --set handling.
struct ConfigArgs {
  std::string path;
  std::vector<std::string> overrides;

  void attach(CLI::App* cmd) {
    cmd->add_option("-c,--config", path, "key=value config file")->check(CLI::ExistingFile);
    cmd->add_option("-s,--set", overrides, "override one key, e.g. --set train.lr=0.001");
  }
  Config load() const {
    Config c = path.empty() ? Config() : Config::load(path);
    for (const auto& o : overrides) c.apply(o);
    return c;
  }
};

fs::path prepare_run_dir(const std::string& dir, const Config& c) {
  fs::path p(dir);
  fs::create_directories(p);
  std::ostringstream os;
  c.write(os);
  write_file(p / "config.txt", os.str());
  return p;
}

void write_table(const fs::path& dir, const experiments::Table& t) {
  write_file(dir / "results.csv", t.csv());
  write_file(dir / "results.json", t.json().dump(2) + "\n");
  std::cout << t.csv();
}

penman::AmrGraph read_graph(const std::string& path) { return penman::parse_penman(read_file(path)); }

// "adapt:20", "structadapt_rgcn", "finetune"
Arm parse_arm(const std::string& spec, const experiments::Setup& s, double finetune_lr) {
  auto colon = spec.find(':');
  std::string name = spec.substr(0, colon);
  std::size_t hidden = colon == std::string::npos ? s.adapter.hidden : std::stoul(spec.substr(colon + 1));
  if (name == "finetune") {
    Arm a;
    a.name = "finetune";
    a.mode = model::TrainMode::kFinetuneAll;
    a.lr = finetune_lr;
    return a;
  }
  auto arm = experiments::adapter_arm(model::parse_adapter_variant(name), hidden, s.train.lr, s.adapter.encoder,
                                      s.adapter.decoder, s.adapter.bases);
  arm.adapter.gcn_degree = s.adapter.gcn_degree;
  if (colon != std::string::npos) arm.name += ":" + std::to_string(hidden);
  return arm;
}

std::vector<Arm> parse_arms(const std::string& list, const experiments::Setup& s, double finetune_lr) {
  std::vector<Arm> arms;
  for (const auto& item : split_list(list)) arms.push_back(parse_arm(item, s, finetune_lr));
  return arms;
}

json stats_json(const penman::GraphStats& st) {
  return {{"size", st.size}, {"diameter", st.diameter}, {"reentrancies", st.reentrancies}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structural adapters for graph-to-text generation"};
  app.require_subcommand(1);

  // parse
  std::string input;
  auto* parse = app.add_subcommand("parse", "Parse a PENMAN graph and print it normalized with its statistics");
  parse->add_option("input", input, "PENMAN file")->required()->check(CLI::ExistingFile);

  // stats
  std::string data_path, split = "test";
  auto* stats = app.add_subcommand("stats", "Graph statistics of a PENMAN file or a JSONL dataset");
  stats->add_option("input", input, "PENMAN file")->check(CLI::ExistingFile);
  stats->add_option("--data", data_path, "JSONL dataset")->check(CLI::ExistingFile);

  // linearize
  std::string mode = "canon", variant = "nodes_and_edges", rep = "rep1";
  std::uint64_t seed = 0;
  auto* linearize = app.add_subcommand("linearize", "Linearize a PENMAN graph");
  linearize->add_option("input", input, "PENMAN file")->required()->check(CLI::ExistingFile);
  linearize->add_option("--mode", mode, "canon, reconf or random");
  linearize->add_option("--variant", variant, "nodes_and_edges or nodes_only");
  linearize->add_option("--seed", seed);

  // graphify
  std::string vocab_path;
  auto* graphify = app.add_subcommand("graphify", "Print the token graph of a PENMAN graph as an edge list");
  graphify->add_option("input", input, "PENMAN file")->required()->check(CLI::ExistingFile);
  graphify->add_option("--mode", mode);
  graphify->add_option("--variant", variant);
  graphify->add_option("--rep", rep, "rep1, rep2 or rep3");
  graphify->add_option("--seed", seed);
  graphify->add_option("--vocab", vocab_path, "vocabulary file (byte-level if omitted)")->check(CLI::ExistingFile);

  // synth
  std::size_t n = 1000, max_nodes = 12;
  double reentrancy_rate = 0.4;
  std::string out;
  auto* synth = app.add_subcommand("synth", "Write a synthetic JSONL corpus");
  synth->add_option("-n", n, "number of records");
  synth->add_option("--seed", seed);
  synth->add_option("--max-nodes", max_nodes);
  synth->add_option("--reentrancy-rate", reentrancy_rate);
  synth->add_option("-o,--out", out, "output path (stdout if omitted)");

  // make-vocab
  ConfigArgs vocab_cfg;
  auto* make_vocab = app.add_subcommand("make-vocab", "Train the subword vocabulary");
  vocab_cfg.attach(make_vocab);
  make_vocab->add_option("-o,--out", out)->required();

  // pretrain
  ConfigArgs pre_cfg;
  std::string run_dir;
  auto* pretrain = app.add_subcommand("pretrain", "Pretrain the backbone with masked reconstruction");
  pre_cfg.attach(pretrain);
  pretrain->add_option("-r,--run-dir", run_dir)->required();

  // train
  ConfigArgs train_cfg;
  auto* trainc = app.add_subcommand("train", "Train one configuration and evaluate it on the test split");
  train_cfg.attach(trainc);
  trainc->add_option("-r,--run-dir", run_dir)->required();

  // generate
  std::string model_path;
  std::size_t beam = 0;
  auto* generate = app.add_subcommand("generate", "Decode a split with a trained model");
  generate->add_option("-m,--model", model_path, "model checkpoint written by train")
      ->required()
      ->check(CLI::ExistingFile);
  generate->add_option("--split", split, "train, dev or test");
  generate->add_option("--beam", beam, "beam size (default: the training config's)");
  generate->add_option("-o,--out", out);

  // evaluate
  std::string hyp_path, ref_path;
  auto* evaluate = app.add_subcommand("evaluate", "Score hypotheses with BLEU and chrF++");
  evaluate->add_option("--hyp", hyp_path)->required()->check(CLI::ExistingFile);
  evaluate->add_option("--ref", ref_path, "one reference per line")->check(CLI::ExistingFile);
  evaluate->add_option("--data", data_path, "JSONL dataset; adds graph-property breakdowns")
      ->check(CLI::ExistingFile);
  evaluate->add_option("--split", split);

  // params
  ConfigArgs params_cfg;
  auto* params = app.add_subcommand("params", "Count trainable and total parameters");
  params_cfg.attach(params);

  // sweep
  ConfigArgs sweep_cfg;
  std::string dims = "8,16,32,64", variants = "adapt,structadapt_gcn,structadapt_rgcn";
  auto* sweep = app.add_subcommand("sweep", "Dev/test scores across adapter widths");
  sweep_cfg.attach(sweep);
  sweep->add_option("-r,--run-dir", run_dir)->required();
  sweep->add_option("--dims", dims);
  sweep->add_option("--variants", variants);

  // lowdata
  ConfigArgs low_cfg;
  std::string sizes = "1000,2000,5000", arms = "finetune,adapt,structadapt_rgcn";
  std::size_t samples = 5, seeds = 2;
  double finetune_lr = 1e-4;
  auto* lowdata = app.add_subcommand("lowdata", "Scores when training on subsamples of the training split");
  low_cfg.attach(lowdata);
  lowdata->add_option("-r,--run-dir", run_dir)->required();
  lowdata->add_option("--sizes", sizes);
  lowdata->add_option("--samples", samples, "subsamples per size");
  lowdata->add_option("--seeds", seeds, "training seeds per subsample");
  lowdata->add_option("--arms", arms, "comma list of finetune or variant[:hidden]");
  lowdata->add_option("--finetune-lr", finetune_lr);

  // robustness
  ConfigArgs rob_cfg;
  std::string modes = "canon,reconf,random";
  auto* robustness = app.add_subcommand("robustness", "Scores under each linearization mode");
  rob_cfg.attach(robustness);
  robustness->add_option("-r,--run-dir", run_dir)->required();
  robustness->add_option("--modes", modes);
  robustness->add_option("--arms", arms, "comma list of finetune or variant[:hidden]");
  robustness->add_option("--finetune-lr", finetune_lr);

  // ablation
  ConfigArgs abl_cfg;
  std::string abl_variants = "adapt,structadapt_gcn";
  auto* ablation = app.add_subcommand("ablation", "Encoder/decoder placement at equal parameter budgets");
  abl_cfg.attach(ablation);
  ablation->add_option("-r,--run-dir", run_dir)->required();
  ablation->add_option("--variants", abl_variants);

  CLI11_PARSE(app, argc, argv);

  try {
    if (parse->parsed()) {
      auto g = read_graph(input);
      std::cout << penman::serialize_penman(g) << "\n" << stats_json(penman::graph_stats(g)).dump() << "\n";
    } else if (stats->parsed()) {
      if (input.empty() == data_path.empty()) throw std::runtime_error("stats: give a PENMAN file or --data");
      if (!input.empty()) {
        auto st = penman::graph_stats(read_graph(input));
        std::cout << "size " << st.size << "\ndiameter " << st.diameter << "\nreentrancies " << st.reentrancies
                  << "\n";
      } else {
        std::vector<penman::GraphStats> all;
        std::map<std::string, std::size_t> per_split;
        for (const auto& r : corpus::load_jsonl(data_path)) {
          all.push_back(penman::graph_stats(penman::parse_penman(r.amr)));
          ++per_split[r.split];
        }
        json j = {{"records", all.size()}, {"splits", per_split}};
        auto count = [&all](const std::vector<train::BucketSpec>& specs, auto field) {
          json counts = json::object();
          for (const auto& b : specs) {
            std::size_t k = 0;
            for (const auto& st : all) k += field(st) >= b.lo && field(st) <= b.hi;
            counts[b.name] = k;
          }
          return counts;
        };
        j["size"] = count(train::size_buckets(), [](const penman::GraphStats& st) { return st.size; });
        j["diameter"] = count(train::diameter_buckets(), [](const penman::GraphStats& st) { return st.diameter; });
        j["reentrancies"] =
            count(train::reentrancy_buckets(), [](const penman::GraphStats& st) { return st.reentrancies; });
        std::cout << j.dump(2) << "\n";
      }
    } else if (linearize->parsed()) {
      auto lin = repr::linearize(read_graph(input), repr::parse_lin_mode(mode), repr::parse_lin_variant(variant), seed);
      std::cout << lin.text() << "\n";
    } else if (graphify->parsed()) {
      auto g = read_graph(input);
      auto vocab = vocab_path.empty() ? bpe::Vocabulary() : bpe::Vocabulary::load(vocab_path);
      auto var = repr::parse_lin_variant(variant);
      auto lin = repr::linearize(g, repr::parse_lin_mode(mode), var, seed);
      auto rels = repr::relation_table(var, repr::observed_roles({g}));
      auto tok = repr::tokenize(vocab, lin);
      auto u = repr::to_unlabeled(penman::normalize_inverse_roles(g));
      auto tg = repr::build_token_graph(u, lin, tok, repr::parse_rep(rep), rels);
      repr::write_edge_list(std::cout, tg);
    } else if (synth->parsed()) {
      auto recs = corpus::generate_corpus(n, seed, max_nodes, reentrancy_rate);
      if (out.empty()) {
        corpus::save_jsonl(std::cout, recs);
      } else {
        corpus::save_jsonl(out, recs);
      }
    } else if (make_vocab->parsed()) {
      auto s = experiments::Setup::from_config(vocab_cfg.load());
      auto train_recs = experiments::load_records(s, nullptr, nullptr);
      auto texts = train::pretraining_texts(s.pretrain_graphs, s.pretrain.seed, s.gen);
      experiments::build_vocab(s, texts, train_recs).save(out);
    } else if (pretrain->parsed()) {
      auto c = pre_cfg.load();
      auto dir = prepare_run_dir(run_dir, c);
      if (c.str("backbone.checkpoint").empty()) c.set("backbone.checkpoint", (dir / "pretrained.ckpt").string());
      auto s = experiments::Setup::from_config(c);
      auto ws = experiments::build_workspace(s, log_line);
      auto held_out = train::pretraining_texts(200, s.pretrain.seed + 1, s.gen);
      double acc = train::reconstruction_accuracy(ws.backbone, ws.vocab, held_out, s.pretrain.mask_rate,
                                                  s.pretrain.seed + 1);
      json m = {{"checkpoint", s.checkpoint}, {"vocab_size", ws.vocab.size()}, {"reconstruction_accuracy", acc}};
      write_file(dir / "metrics.json", m.dump(2) + "\n");
      std::cout << m.dump(2) << "\n";
    } else if (trainc->parsed()) {
      auto c = train_cfg.load();
      auto dir = prepare_run_dir(run_dir, c);
      auto s = experiments::Setup::from_config(c);
      auto ws = experiments::build_workspace(s, log_line);
      Arm arm;
      arm.adapter = s.adapter;
      arm.mode = s.train.mode;
      arm.lr = s.train.lr;
      auto t = experiments::train_arm(ws, arm, s.train, ws.train, s.data_seed, log_line);
      std::ostringstream snapshot;
      c.write(snapshot);
      experiments::save_model((dir / "model.ckpt").string(), t.bundle, ws.vocab, {{"config", snapshot.str()}});
      auto ts = train::prepare_all(ws.test, t.pipeline);
      auto hyps = train::decode_all(t.bundle, ws.vocab, ts, s.train.beam, s.train.max_decode_len);
      std::string hyp_text;
      for (const auto& h : hyps) hyp_text += h + "\n";
      write_file(dir / "test.hyp", hyp_text);
      auto report = train::evaluate(hyps, ts);
      auto pc = model::count_params(t.bundle, arm.mode);
      report.trainable_fraction = pc.fraction();
      report.steps = t.log.steps;
      report.wall_seconds = t.log.wall_seconds;
      auto j = train::to_json(report);
      j["dev_bleu"] = t.log.best_dev_bleu;
      j["best_epoch"] = t.log.best_epoch;
      j["trainable"] = pc.trainable;
      j["total"] = pc.total;
      write_file(dir / "metrics.json", j.dump(2) + "\n");
      std::cout << "test BLEU " << experiments::fmt(report.bleu) << " chrF++ " << experiments::fmt(report.chrf)
                << "\n";
    } else if (generate->parsed()) {
      auto m = experiments::load_model(model_path);
      std::istringstream cs(m.meta.at("config").get<std::string>());
      auto c = Config::parse(cs, model_path);
      auto s = experiments::Setup::from_config(c);
      std::vector<corpus::DatasetRecord> dev, test;
      auto tr = experiments::load_records(s, &dev, &test);
      const auto& recs = split == "train" ? tr : split == "dev" ? dev : split == "test" ? test
                                                                  : throw std::runtime_error("unknown split " + split);
      experiments::Workspace view;
      view.vocab = m.vocab;
      auto pipe = experiments::pipeline_for(view, s.train, m.bundle.relations, s.data_seed);
      auto data = train::prepare_all(recs, pipe);
      auto hyps = train::decode_all(m.bundle, m.vocab, data, beam ? beam : s.train.beam, s.train.max_decode_len);
      std::ostringstream os;
      for (const auto& h : hyps) os << h << "\n";
      if (out.empty()) {
        std::cout << os.str();
      } else {
        write_file(out, os.str());
      }
    } else if (evaluate->parsed()) {
      auto hyps = read_lines(hyp_path);
      if (ref_path.empty() == data_path.empty()) throw std::runtime_error("evaluate: give --ref or --data");
      json j;
      if (!ref_path.empty()) {
        auto refs = read_lines(ref_path);
        j = {{"bleu", eval::bleu(hyps, refs)}, {"chrf", eval::chrf(hyps, refs)}};
      } else {
        std::vector<train::Prepared> data;
        for (const auto& r : corpus::load_jsonl(data_path)) {
          if (r.split != split) continue;
          train::Prepared p;
          p.reference = r.text;
          p.stats = penman::graph_stats(penman::parse_penman(r.amr));
          data.push_back(std::move(p));
        }
        if (data.size() != hyps.size()) {
          throw std::runtime_error("evaluate: " + std::to_string(hyps.size()) + " hypotheses for " +
                                   std::to_string(data.size()) + " " + split + " records");
        }
        j = train::to_json(train::evaluate(hyps, data));
      }
      std::cout << j.dump(2) << "\n";
    } else if (params->parsed()) {
      auto s = experiments::Setup::from_config(params_cfg.load());
      auto bc = s.backbone;
      bc.vocab = s.vocab_size;
      auto rels = s.train.variant == repr::LinVariant::kNodesAndEdges
                      ? repr::RelationTable::default_reverse()
                      : repr::RelationTable::typed(
                            {corpus::role_inventory().begin(), corpus::role_inventory().end()});
      auto b = model::make_bundle(bc, s.adapter, s.train.seed, rels);
      auto pc = model::count_params(b, s.train.mode);
      json j = {{"trainable", pc.trainable}, {"total", pc.total}, {"fraction", pc.fraction()}};
      std::cout << j.dump(2) << "\n";
    } else if (sweep->parsed()) {
      auto c = sweep_cfg.load();
      auto dir = prepare_run_dir(run_dir, c);
      auto s = experiments::Setup::from_config(c);
      auto ws = experiments::build_workspace(s, log_line);
      std::vector<model::AdapterVariant> vs;
      for (const auto& v : split_list(variants)) vs.push_back(model::parse_adapter_variant(v));
      write_table(dir, experiments::sweep_hidden(ws, s, vs, parse_sizes(dims), log_line));
    } else if (lowdata->parsed()) {
      auto c = low_cfg.load();
      auto dir = prepare_run_dir(run_dir, c);
      auto s = experiments::Setup::from_config(c);
      auto ws = experiments::build_workspace(s, log_line);
      write_table(dir, experiments::low_data(ws, s, parse_arms(arms, s, finetune_lr), parse_sizes(sizes), samples,
                                             seeds, log_line));
    } else if (robustness->parsed()) {
      auto c = rob_cfg.load();
      auto dir = prepare_run_dir(run_dir, c);
      auto s = experiments::Setup::from_config(c);
      auto ws = experiments::build_workspace(s, log_line);
      std::vector<repr::LinMode> ms;
      for (const auto& m : split_list(modes)) ms.push_back(repr::parse_lin_mode(m));
      write_table(dir, experiments::linearization_robustness(ws, s, parse_arms(arms, s, finetune_lr), ms, true,
                                                             log_line));
    } else if (ablation->parsed()) {
      auto c = abl_cfg.load();
      auto dir = prepare_run_dir(run_dir, c);
      auto s = experiments::Setup::from_config(c);
      auto ws = experiments::build_workspace(s, log_line);
      std::vector<model::AdapterVariant> vs;
      for (const auto& v : split_list(abl_variants)) vs.push_back(model::parse_adapter_variant(v));
      auto rels = experiments::relations_for(s.train.variant, ws.train);
      auto arm_list = experiments::placement_arms(vs, s.adapter.hidden, s.train.lr, ws.backbone.backbone.layers,
                                                  ws.backbone.backbone.d, rels.size());
      write_table(dir, experiments::placement_ablation(ws, s, arm_list, log_line));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
