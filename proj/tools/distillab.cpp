// Copyright 2026 The distillab Authors
// SPDX-License-Identifier: Apache-2.0
#include "distillab/harness.hpp"

int main(int argc, char** argv) { return distillab::cli(argc, argv); }
