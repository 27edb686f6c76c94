#include "tfg/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace tfg {

using nlohmann::json;

json PipelineConfig::to_json() const {
  return json{{"lambda_lmark", lambda_lmark},
              {"lambda_temp", lambda_temp},
              {"lambda_pix", lambda_pix},
              {"lambda_adv", lambda_adv},
              {"lambda_reg", lambda_reg},
              {"learning_rate", learning_rate},
              {"beta1", beta1},
              {"beta2", beta2},
              {"batch", batch},
              {"blink_sequence_length", blink_sequence_length},
              {"blink_noise_dim", blink_noise_dim},
              {"blink_hidden", blink_hidden},
              {"blink_learning_rate", blink_learning_rate},
              {"blink_range_weight", blink_range_weight},
              {"resolution", resolution},
              {"pca_variance", pca_variance},
              {"texture_base_channels", texture_base_channels},
              {"texture_lm_channels", texture_lm_channels},
              {"texture_residual_blocks", texture_residual_blocks},
              {"disc_base_channels", disc_base_channels},
              {"disc_strided_layers", disc_strided_layers},
              {"landmark_steps", landmark_steps},
              {"blink_steps", blink_steps},
              {"texture_steps", texture_steps},
              {"seed", seed}};
}

PipelineConfig PipelineConfig::from_json(const json& j) {
  PipelineConfig c;
  auto get = [&j](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("lambda_lmark", c.lambda_lmark);
  get("lambda_temp", c.lambda_temp);
  get("lambda_pix", c.lambda_pix);
  get("lambda_adv", c.lambda_adv);
  get("lambda_reg", c.lambda_reg);
  get("learning_rate", c.learning_rate);
  get("beta1", c.beta1);
  get("beta2", c.beta2);
  get("batch", c.batch);
  get("blink_sequence_length", c.blink_sequence_length);
  get("blink_noise_dim", c.blink_noise_dim);
  get("blink_hidden", c.blink_hidden);
  get("blink_learning_rate", c.blink_learning_rate);
  get("blink_range_weight", c.blink_range_weight);
  get("resolution", c.resolution);
  get("pca_variance", c.pca_variance);
  get("texture_base_channels", c.texture_base_channels);
  get("texture_lm_channels", c.texture_lm_channels);
  get("texture_residual_blocks", c.texture_residual_blocks);
  get("disc_base_channels", c.disc_base_channels);
  get("disc_strided_layers", c.disc_strided_layers);
  get("landmark_steps", c.landmark_steps);
  get("blink_steps", c.blink_steps);
  get("texture_steps", c.texture_steps);
  get("seed", c.seed);
  return c;
}

PipelineConfig PipelineConfig::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("PipelineConfig::load: cannot open " + path);
  return from_json(json::parse(f));
}

void PipelineConfig::save(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("PipelineConfig::save: cannot open " + path);
  f << to_json().dump(2) << "\n";
}

std::string PipelineConfig::content_hash() const { return fnv1a64_hex(to_json().dump()); }

uint64_t fnv1a64(const std::string& bytes) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string fnv1a64_hex(const std::string& bytes) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

std::string file_hash_hex(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("file_hash_hex: cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return fnv1a64_hex(ss.str());
}

}  // namespace tfg
