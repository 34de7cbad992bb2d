#pragma once

#include <cstdint>
#include <stdexcept>

namespace hydrocube {

struct TrainConfig {
    int epochs = 10;
    int batch_size = 8;
    double learning_rate = 1e-3;
    std::uint64_t seed = 1;
    double validation_ratio = 0.2;  // split by location where applicable

    void validate() const {
        if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
        if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch size must be >= 1");
        if (learning_rate <= 0) throw std::invalid_argument("TrainConfig: learning rate must be > 0");
        if (validation_ratio < 0 || validation_ratio >= 1)
            throw std::invalid_argument("TrainConfig: validation ratio must be in [0,1)");
    }
};

}  // namespace hydrocube
