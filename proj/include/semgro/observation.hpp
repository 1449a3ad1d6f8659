// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <set>
#include <string>

namespace semgro
{

/// What the agent perceives at one step: visible object names and their state words
/// (OPEN, CLOSED, ON, OFF). Every key of `object_states` is also in `object_names`.
struct Observation
{
    std::string snapshot_id;
    std::string room;
    std::set<std::string> object_names;
    std::map<std::string, std::string> object_states;

    bool operator==(Observation const&) const = default;
};

} // namespace semgro
