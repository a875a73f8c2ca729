#pragma once

#include <string>
#include <vector>

#include "gtlm/common.hpp"

namespace gtlm {

// One named trainable array. pinned_prefix marks leading row-major entries
// that are frozen at their initial value (the SPD bucket-0 row): they get
// no optimizer updates and are skipped when sampling coordinates.
struct ParamArray {
    std::string name;
    int rows = 0, cols = 0;
    std::vector<double> value;
    bool bias_group = false;
    int pinned_prefix = 0;
    std::vector<double> adam_m, adam_v;

    size_t size() const { return value.size(); }
};

struct ParamStore {
    std::vector<ParamArray> arrays;

    int add(const std::string& name, int rows, int cols, bool bias_group,
            int pinned_prefix = 0) {
        ParamArray a;
        a.name = name;
        a.rows = rows;
        a.cols = cols;
        a.value.assign(static_cast<size_t>(rows) * cols, 0.0);
        a.bias_group = bias_group;
        a.pinned_prefix = pinned_prefix;
        arrays.push_back(std::move(a));
        return static_cast<int>(arrays.size()) - 1;
    }

    int index_of(const std::string& name) const {
        for (int i = 0; i < static_cast<int>(arrays.size()); ++i)
            if (arrays[i].name == name) return i;
        fail("UnknownParameter", name);
    }

    ParamArray& by_name(const std::string& name) { return arrays[index_of(name)]; }
    const ParamArray& by_name(const std::string& name) const {
        return arrays[index_of(name)];
    }

    size_t trainable_count(bool bias_only = false, bool backbone_only = false) const {
        size_t n = 0;
        for (const auto& a : arrays) {
            if (bias_only && !a.bias_group) continue;
            if (backbone_only && a.bias_group) continue;
            n += a.size() - a.pinned_prefix;
        }
        return n;
    }
};

}  // namespace gtlm
