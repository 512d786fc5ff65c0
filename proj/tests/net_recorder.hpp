#pragma once

// Linking net_recorder.cpp interposes connect() and socket() for the whole
// process and counts every call.
namespace vulnsev::testing {

int connect_calls();
int socket_calls();
void reset_net_counters();

}  // namespace vulnsev::testing
