#include "staggercast/proxy/domain_table.hpp"

#include "staggercast/errors.hpp"

#include <algorithm>
#include <cctype>

namespace staggercast::proxy {

namespace {

std::string normalize(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    while (!out.empty() && out.back() == '.') out.pop_back();
    while (!out.empty() && out.front() == '.') out.erase(out.begin());
    return out;
}

}  // namespace

void ManagedDomainTable::add(std::string suffix, ManagedDomain entry) {
    auto key = normalize(suffix);
    if (key.empty()) throw PreconditionError("empty domain suffix");
    if (!entries_.emplace(std::move(key), std::move(entry)).second) {
        throw PreconditionError("duplicate domain suffix '" + suffix + "'");
    }
}

std::optional<std::pair<std::string, ManagedDomain>> ManagedDomainTable::lookup(std::string_view host) const {
    const std::string h = normalize(host);
    // Walk from the full host towards the top-level label: the first hit is the longest suffix.
    std::string_view rest = h;
    while (!rest.empty()) {
        if (auto it = entries_.find(rest); it != entries_.end()) return std::pair{it->first, it->second};
        const auto dot = rest.find('.');
        if (dot == std::string_view::npos) break;
        rest.remove_prefix(dot + 1);
    }
    return std::nullopt;
}

}  // namespace staggercast::proxy
