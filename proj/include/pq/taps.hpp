#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pq/tensor.hpp"

namespace pq {

// Captured per-block activations and attention maps from one forward pass.
// Rows of each activation tensor correspond to forwarded positions; the
// content mask separates literal prefix rows (when a prompt was forwarded
// inline) from content rows. With a cached prefix no prefix rows are ever
// forwarded, so all rows are content and prefix_len only records the cache
// length.
struct TapRecord {
    int64_t prefix_len = 0;
    std::vector<uint8_t> content_mask;  // per row: 1 = content position

    std::map<std::string, Tensor> activations;
    std::vector<std::string> quant_tap_names;  // taps that enter the quantization error

    // attention[layer][head]: [rows, ctx] score matrices; the first
    // attn_prefix_cols context columns belong to the prefix.
    std::vector<std::vector<Tensor>> attention;
    int64_t attn_prefix_cols = 0;

    int64_t content_rows() const {
        int64_t n = 0;
        for (uint8_t m : content_mask) n += m;
        return n;
    }
};

}  // namespace pq
