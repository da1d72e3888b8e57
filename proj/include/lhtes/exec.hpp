#pragma once

namespace lhtes {

/// Selects between the serial reference path and the OpenMP path of a
/// data-parallel kernel. Both produce bitwise-identical results.
enum class Exec { serial, parallel };

}  // namespace lhtes
