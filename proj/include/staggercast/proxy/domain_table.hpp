#pragma once

#include "staggercast/types.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace staggercast::proxy {

struct ManagedDomain {
    AppClass app_class = AppClass::Browsing;
    std::vector<std::string> tags;
    Genre genre = Genre::None;
    /// Transfer size assumed for rule matching, since a GET carries no body size.
    std::uint64_t size_hint_bytes = 0;
};

/// Domain-suffix table. A suffix matches the host itself or any subdomain
/// (label boundary), and the longest matching suffix wins.
class ManagedDomainTable {
public:
    /// Throws PreconditionError on an empty or duplicate suffix.
    void add(std::string suffix, ManagedDomain entry);

    /// Entry plus the suffix that matched.
    std::optional<std::pair<std::string, ManagedDomain>> lookup(std::string_view host) const;
    std::size_t size() const { return entries_.size(); }

private:
    std::map<std::string, ManagedDomain, std::less<>> entries_;
};

}  // namespace staggercast::proxy
