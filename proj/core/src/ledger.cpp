#include "fingers/ledger.hpp"

// CostLedger is header-only; this translation unit anchors the target.
namespace fingers {}
