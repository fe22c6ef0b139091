//! Holds the `acceptance` test target, which runs every acceptance criterion
//! end to end and prints one PASS/FAIL line per criterion.
