#pragma once

namespace stratacast {

/// Routes log output to stderr at the level named by STRATACAST_LOG
/// (error, warn, info, debug; default warn). Safe to call repeatedly.
void init_logging();

}  // namespace stratacast
