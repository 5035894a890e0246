#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sprint/errors.hpp"
#include "sprint/rng.hpp"
#include "sprint/trainer.hpp"

static_assert(std::endian::native == std::endian::little,
              "model files are little-endian; big-endian hosts are unsupported");
static_assert(sizeof(double) == 8 && std::numeric_limits<double>::is_iec559,
              "model files assume IEEE-754 binary64");

namespace sprint {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'S', 'P', 'R', 'I', 'N', 'T', 'M', '1'};
constexpr int kFormatVersion = 1;

void append_u64(std::string& out, uint64_t v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.append(buf, 8);
}

void append_matrix_row_major(std::string& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      double v = m(r, c);
      char buf[8];
      std::memcpy(buf, &v, 8);
      out.append(buf, 8);
    }
  }
}

void read_matrix_row_major(const char* data, Eigen::MatrixXd& m) {
  std::size_t offset = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      double v;
      std::memcpy(&v, data + offset, 8);
      m(r, c) = v;
      offset += 8;
    }
  }
}

json config_to_json(const TrainConfig& cfg) {
  return json{{"lambda", cfg.lambda},
              {"learning_rate", cfg.learning_rate},
              {"steps", cfg.steps},
              {"batch_size", cfg.batch_size},
              {"seed", cfg.seed},
              {"radius", cfg.radius},
              {"embedding_dim", cfg.embedding_dim},
              {"optimizer", optimizer_name(cfg.optimizer)},
              {"momentum", cfg.momentum},
              {"adam_beta1", cfg.adam_beta1},
              {"adam_beta2", cfg.adam_beta2},
              {"adam_epsilon", cfg.adam_epsilon},
              {"trace_every", cfg.trace_every}};
}

TrainConfig config_from_json(const json& j) {
  TrainConfig cfg;
  cfg.lambda = j.at("lambda").get<double>();
  cfg.learning_rate = j.at("learning_rate").get<double>();
  cfg.steps = j.at("steps").get<int>();
  cfg.batch_size = j.at("batch_size").get<int>();
  cfg.seed = j.at("seed").get<uint64_t>();
  cfg.radius = j.at("radius").get<double>();
  cfg.embedding_dim = j.at("embedding_dim").get<int>();
  cfg.optimizer = optimizer_from_name(j.at("optimizer").get<std::string>());
  cfg.momentum = j.at("momentum").get<double>();
  cfg.adam_beta1 = j.at("adam_beta1").get<double>();
  cfg.adam_beta2 = j.at("adam_beta2").get<double>();
  cfg.adam_epsilon = j.at("adam_epsilon").get<double>();
  cfg.trace_every = j.at("trace_every").get<int>();
  return cfg;
}

}  // namespace

std::string serialize_model(const TrainedModel& model) {
  std::string payload;
  payload.reserve(8 * static_cast<std::size_t>(model.encoder.weight.size() +
                                               model.encoder.bias.size() +
                                               model.embeddings.vectors.size()));
  append_matrix_row_major(payload, model.encoder.weight);
  append_matrix_row_major(payload, model.encoder.bias);
  append_matrix_row_major(payload, model.embeddings.vectors);

  json catalog = json::array();
  for (const auto& e : model.catalog.entries()) {
    catalog.push_back({{"j", e.index}, {"layer", e.layer}, {"head", e.head}});
  }
  json trace = json::array();
  for (const auto& [step, value] : model.loss_trace) trace.push_back({step, value});

  json header{{"version", kFormatVersion},
              {"feature_dim", model.feature_dim()},
              {"embedding_dim", model.embedding_dim()},
              {"num_heads", model.num_heads()},
              {"catalog", std::move(catalog)},
              {"config", config_to_json(model.config)},
              {"loss_trace", std::move(trace)},
              {"excluded_questions", model.excluded_questions},
              {"payload_bytes", payload.size()},
              {"payload_fnv1a64", to_hex(fnv1a64(payload.data(), payload.size()))}};
  std::string header_text = header.dump();

  std::string out;
  out.append(kMagic, 8);
  append_u64(out, header_text.size());
  out += header_text;
  out += payload;
  return out;
}

TrainedModel parse_model(const std::string& bytes) {
  if (bytes.size() < 16) throw parse_error("model file truncated before header");
  if (std::memcmp(bytes.data(), kMagic, 8) != 0) {
    if (std::memcmp(bytes.data(), "SPRINTM", 7) == 0) {
      throw parse_error("unsupported model format version '" + bytes.substr(0, 8) +
                        "'; this build reads SPRINTM1");
    }
    throw parse_error("not a model file (bad magic)");
  }
  uint64_t header_len;
  std::memcpy(&header_len, bytes.data() + 8, 8);
  if (16 + header_len > bytes.size()) throw parse_error("model file truncated inside header");

  json header;
  try {
    header = json::parse(bytes.substr(16, header_len));
  } catch (const json::exception& e) {
    throw parse_error(std::string("model header: ") + e.what());
  }
  int version = header.at("version").get<int>();
  if (version != kFormatVersion) {
    throw parse_error("unsupported model format version " + std::to_string(version) +
                      "; this build reads version " + std::to_string(kFormatVersion));
  }

  const int f = header.at("feature_dim").get<int>();
  const int p = header.at("embedding_dim").get<int>();
  const int lh = header.at("num_heads").get<int>();
  if (f < 1 || p < 1 || lh < 1) throw parse_error("model header has non-positive dimensions");

  uint64_t payload_bytes = header.at("payload_bytes").get<uint64_t>();
  uint64_t expected = 8ull * (static_cast<uint64_t>(f) * p + p + static_cast<uint64_t>(lh) * p);
  if (payload_bytes != expected) {
    throw parse_error("model payload size does not match the declared dimensions");
  }
  std::size_t payload_offset = 16 + header_len;
  if (bytes.size() - payload_offset < payload_bytes) {
    throw parse_error("model payload truncated: checksum verification impossible (expected " +
                      std::to_string(payload_bytes) + " bytes, found " +
                      std::to_string(bytes.size() - payload_offset) + ")");
  }
  uint64_t checksum = fnv1a64(bytes.data() + payload_offset, payload_bytes);
  if (to_hex(checksum) != header.at("payload_fnv1a64").get<std::string>()) {
    throw parse_error("model payload checksum mismatch; the file is corrupt");
  }

  std::vector<HeadEntry> entries;
  for (const auto& item : header.at("catalog")) {
    entries.push_back({item.at("j").get<int>(), item.at("layer").get<int>(),
                       item.at("head").get<int>()});
  }
  HeadCatalog catalog(std::move(entries));
  if (catalog.size() != lh) throw parse_error("model catalog size does not match num_heads");

  TrainedModel model{QuestionEncoder{Eigen::MatrixXd(f, p), Eigen::VectorXd(p)},
                     HeadEmbeddings{Eigen::MatrixXd(lh, p)},
                     std::move(catalog),
                     config_from_json(header.at("config")),
                     {},
                     header.at("excluded_questions").get<int>()};
  for (const auto& item : header.at("loss_trace")) {
    model.loss_trace.emplace_back(item.at(0).get<int>(), item.at(1).get<double>());
  }

  const char* data = bytes.data() + payload_offset;
  read_matrix_row_major(data, model.encoder.weight);
  data += 8 * static_cast<std::size_t>(f) * static_cast<std::size_t>(p);
  Eigen::MatrixXd bias(p, 1);
  read_matrix_row_major(data, bias);
  model.encoder.bias = bias;
  data += 8 * static_cast<std::size_t>(p);
  read_matrix_row_major(data, model.embeddings.vectors);
  return model;
}

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write model file '" + path.string() + "'");
  std::string bytes = serialize_model(model);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw io_error("failed while writing '" + path.string() + "'");
}

TrainedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open model file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_model(buf.str());
}

}  // namespace sprint
