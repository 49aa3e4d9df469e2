#pragma once

#include <stdexcept>
#include <string>

namespace strata {

// Root of every error the engine throws on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class MalformedTrajectory : public Error {
public:
    using Error::Error;
};

class EmptyCorpus : public Error {
public:
    using Error::Error;
};

class EmptyQuery : public Error {
public:
    EmptyQuery() : Error("empty query") {}
};

class ExtractorFailure : public Error {
public:
    ExtractorFailure(std::string chunk, const std::string& what)
        : Error("extractor failed on chunk " + chunk + ": " + what), chunk_id(std::move(chunk)) {}
    std::string chunk_id;
};

class StorageCorrupt : public Error {
public:
    using Error::Error;
};

class StorageFailure : public Error {
public:
    using Error::Error;
};

class ProviderUnavailable : public Error {
public:
    using Error::Error;
};

class FetchFailure : public Error {
public:
    using Error::Error;
};

class ClientFailure : public Error {
public:
    using Error::Error;
};

class UnknownTool : public Error {
public:
    explicit UnknownTool(const std::string& name) : Error("unknown tool: " + name) {}
};

class NoEvidence : public Error {
public:
    NoEvidence() : Error("trajectory contains no evidence") {}
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace strata
