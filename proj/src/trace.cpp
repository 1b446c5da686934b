// tracescan: exploit detection over EVM execution traces
// Copyright 2026 The tracescan Authors.
// SPDX-License-Identifier: Apache-2.0

#include <tracescan/trace.hpp>

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <set>

namespace tracescan
{
namespace
{
using json = nlohmann::json;
using Kind = TraceError::Kind;

[[noreturn]] void fail(Kind kind, const std::string& msg)
{
    throw TraceError(kind, msg);
}

std::string at_line(size_t line)
{
    return "line " + std::to_string(line) + ": ";
}

/// Splits on '\n', dropping a trailing '\r'. Views stay valid while `text` lives.
std::vector<std::string_view> split_lines(std::string_view text)
{
    std::vector<std::string_view> lines;
    size_t start = 0;
    while (start <= text.size())
    {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos)
            end = text.size();
        auto line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r')
            line.remove_suffix(1);
        lines.push_back(line);
        if (end == text.size())
            break;
        start = end + 1;
    }
    return lines;
}

bool is_blank(std::string_view s)
{
    return std::all_of(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t'; });
}

uint64_t require_uint(const json& obj, const char* key, size_t line)
{
    const auto it = obj.find(key);
    if (it == obj.end())
        fail(Kind::SchemaViolation, at_line(line) + "missing field '" + key + "'");
    if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<int64_t>() >= 0))
        fail(Kind::SchemaViolation, at_line(line) + "field '" + key + "' must be a non-negative integer");
    return it->get<uint64_t>();
}

const std::string& require_string(const json& obj, const char* key, size_t line)
{
    const auto it = obj.find(key);
    if (it == obj.end())
        fail(Kind::SchemaViolation, at_line(line) + "missing field '" + key + "'");
    if (!it->is_string())
        fail(Kind::SchemaViolation, at_line(line) + "field '" + key + "' must be a string");
    return it->get_ref<const std::string&>();
}

Address require_address(const std::string& s, size_t line)
{
    const auto a = Address::from_hex(s);
    if (!a)
        fail(Kind::SchemaViolation, at_line(line) + "invalid address '" + s + "'");
    return *a;
}

Wei require_wei(const std::string& s, size_t line)
{
    const auto v = parse_wei(s);
    if (!v)
        fail(Kind::SchemaViolation, at_line(line) + "invalid wei amount '" + s + "'");
    return *v;
}

json parse_json_line(std::string_view text, size_t line)
{
    try
    {
        auto j = json::parse(text);
        if (!j.is_object())
            fail(Kind::MalformedTrace, at_line(line) + "expected a JSON object");
        return j;
    }
    catch (const json::parse_error& e)
    {
        fail(Kind::MalformedTrace, at_line(line) + e.what());
    }
}

TransactionContext parse_metadata(std::string_view text, size_t line)
{
    const auto j = parse_json_line(text, line);
    TransactionContext tx;
    tx.block_number = require_uint(j, "blockNumber", line);
    tx.tx_index = require_uint(j, "txIndex", line);
    tx.sender = require_address(require_string(j, "sender", line), line);
    tx.callee = require_address(require_string(j, "callee", line), line);
    tx.value = require_wei(require_string(j, "value", line), line);

    const auto balances = j.find("preBalances");
    if (balances == j.end() || !balances->is_object())
        fail(Kind::SchemaViolation, at_line(line) + "missing object field 'preBalances'");
    for (const auto& [addr, amount] : balances->items())
    {
        if (!amount.is_string())
            fail(Kind::SchemaViolation, at_line(line) + "preBalances values must be decimal strings");
        tx.pre_balances[require_address(addr, line)] =
            require_wei(amount.get_ref<const std::string&>(), line);
    }
    if (!tx.pre_balances.contains(tx.callee))
        fail(Kind::SchemaViolation, at_line(line) + "preBalances must contain the callee");

    const auto& status = require_string(j, "status", line);
    if (status == "success")
        tx.status = TxStatus::success;
    else if (status == "reverted")
        tx.status = TxStatus::reverted;
    else
        fail(Kind::SchemaViolation, at_line(line) + "status must be 'success' or 'reverted'");
    return tx;
}

void validate_step(const TraceStep& step, size_t line)
{
    if (step.depth < 1)
        fail(Kind::SchemaViolation, at_line(line) + "depth must be >= 1");
    if (step.stack.size() > kMaxStackDepth)
        fail(Kind::SchemaViolation,
            at_line(line) + "stack has " + std::to_string(step.stack.size()) +
                " entries, limit is 1024");
}

Opcode require_opcode(std::string_view mnemonic, size_t line)
{
    const auto op = opcode_from_name(mnemonic);
    if (!op)
        fail(Kind::SchemaViolation, at_line(line) + "unknown opcode '" + std::string{mnemonic} + "'");
    return *op;
}

Word require_word(std::string_view hex, size_t line)
{
    const auto w = Word::from_hex(hex);
    if (!w)
        fail(Kind::SchemaViolation, at_line(line) + "invalid stack word '" + std::string{hex} + "'");
    return *w;
}

TraceStep parse_step_slow(std::string_view text, size_t line)
{
    const auto j = parse_json_line(text, line);
    TraceStep step;
    step.pc = require_uint(j, "pc", line);
    step.op = require_opcode(require_string(j, "op", line), line);
    const auto depth = require_uint(j, "depth", line);
    if (depth > UINT32_MAX)
        fail(Kind::SchemaViolation, at_line(line) + "depth out of range");
    step.depth = static_cast<uint32_t>(depth);
    step.gas = require_uint(j, "gas", line);

    const auto stack = j.find("stack");
    if (stack == j.end() || !stack->is_array())
        fail(Kind::SchemaViolation, at_line(line) + "missing array field 'stack'");
    if (stack->size() > kMaxStackDepth)
        fail(Kind::SchemaViolation,
            at_line(line) + "stack has " + std::to_string(stack->size()) + " entries, limit is 1024");
    step.stack.reserve(stack->size());
    for (const auto& w : *stack)
    {
        if (!w.is_string())
            fail(Kind::SchemaViolation, at_line(line) + "stack entries must be hex strings");
        step.stack.push_back(require_word(w.get_ref<const std::string&>(), line));
    }
    if (const auto fe = j.find("frameExit"); fe != j.end())
    {
        if (!fe->is_boolean())
            fail(Kind::SchemaViolation, at_line(line) + "frameExit must be a boolean");
        step.frame_exit = fe->get<bool>();
    }
    validate_step(step, line);
    return step;
}

/// Scanner for the canonical flat step object. Returns false whenever the line
/// departs from the expected shape; the caller then falls back to the full JSON
/// parser, which also produces the precise error.
class FastStepScanner
{
public:
    explicit FastStepScanner(std::string_view s) noexcept : s_{s} {}

    bool scan(TraceStep& out)
    {
        bool have_pc = false, have_op = false, have_depth = false, have_gas = false,
             have_stack = false;
        ws();
        if (!eat('{'))
            return false;
        ws();
        if (peek() == '}')
            return false;
        while (true)
        {
            std::string_view key;
            if (!string(key))
                return false;
            ws();
            if (!eat(':'))
                return false;
            ws();
            if (key == "pc")
                have_pc = number(out.pc);
            else if (key == "gas")
                have_gas = number(out.gas);
            else if (key == "depth")
            {
                uint64_t d = 0;
                if (!number(d) || d > UINT32_MAX)
                    return false;
                out.depth = static_cast<uint32_t>(d);
                have_depth = true;
            }
            else if (key == "op")
            {
                std::string_view mnemonic;
                if (!string(mnemonic))
                    return false;
                const auto op = opcode_from_name(mnemonic);
                if (!op)
                    return false;
                out.op = *op;
                have_op = true;
            }
            else if (key == "stack")
            {
                if (!words(out.stack))
                    return false;
                have_stack = true;
            }
            else if (key == "frameExit")
            {
                if (s_.substr(pos_, 4) == "true")
                {
                    out.frame_exit = true;
                    pos_ += 4;
                }
                else if (s_.substr(pos_, 5) == "false")
                {
                    out.frame_exit = false;
                    pos_ += 5;
                }
                else
                    return false;
            }
            else
                return false;
            ws();
            if (eat(','))
            {
                ws();
                continue;
            }
            if (!eat('}'))
                return false;
            break;
        }
        ws();
        return pos_ == s_.size() && have_pc && have_op && have_depth && have_gas && have_stack;
    }

private:
    [[nodiscard]] char peek() const noexcept { return pos_ < s_.size() ? s_[pos_] : '\0'; }
    bool eat(char c) noexcept
    {
        if (peek() != c)
            return false;
        ++pos_;
        return true;
    }
    void ws() noexcept
    {
        while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t'))
            ++pos_;
    }
    bool string(std::string_view& out) noexcept
    {
        if (!eat('"'))
            return false;
        size_t end = pos_;
        while (end < s_.size() && s_[end] != '"')
        {
            if (s_[end] == '\\')
                return false;
            ++end;
        }
        if (end == s_.size())
            return false;
        out = s_.substr(pos_, end - pos_);
        pos_ = end + 1;
        return true;
    }
    bool number(uint64_t& out) noexcept
    {
        const auto* first = s_.data() + pos_;
        const auto* last = s_.data() + s_.size();
        if (first == last || *first < '0' || *first > '9')
            return false;
        const auto [ptr, ec] = std::from_chars(first, last, out);
        if (ec != std::errc{})
            return false;
        if (ptr != last && (*ptr == '.' || *ptr == 'e' || *ptr == 'E'))
            return false;
        pos_ += static_cast<size_t>(ptr - first);
        return true;
    }
    bool words(std::vector<Word>& out)
    {
        if (!eat('['))
            return false;
        ws();
        out.clear();
        if (eat(']'))
            return true;
        if (const auto close = s_.find(']', pos_); close != std::string_view::npos)
            out.reserve(static_cast<size_t>(std::count(s_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                                s_.begin() + static_cast<std::ptrdiff_t>(close), ',')) + 1);
        while (true)
        {
            std::string_view hex;
            if (!string(hex))
                return false;
            const auto w = Word::from_hex(hex);
            if (!w || out.size() == kMaxStackDepth)
                return false;
            out.push_back(*w);
            ws();
            if (eat(','))
            {
                ws();
                continue;
            }
            return eat(']');
        }
    }

    std::string_view s_;
    size_t pos_ = 0;
};

TraceStep parse_step(std::string_view text, size_t line)
{
    TraceStep step;
    if (FastStepScanner{text}.scan(step) && step.depth >= 1)
        return step;
    return parse_step_slow(text, line);
}

ExecutionTrace parse_trace_lines(
    const std::vector<std::string_view>& lines, size_t first, size_t last, size_t line_offset)
{
    while (first < last && is_blank(lines[first]))
        ++first;
    if (first == last)
        fail(Kind::MalformedTrace, "trace has no metadata line");

    ExecutionTrace trace;
    trace.tx = parse_metadata(lines[first], line_offset + first + 1);
    trace.steps.reserve(last - first - 1);
    for (size_t i = first + 1; i < last; ++i)
    {
        if (is_blank(lines[i]))
            continue;
        const size_t line_no = line_offset + i + 1;
        auto step = parse_step(lines[i], line_no);
        if (trace.steps.empty())
        {
            if (step.depth != 1)
                fail(Kind::SchemaViolation, at_line(line_no) + "first step must have depth 1");
        }
        else
        {
            const auto& prev = trace.steps.back();
            if (step.depth > prev.depth + 1)
                fail(Kind::DepthJump, at_line(line_no) + "depth increases by more than one");
            if (step.depth + 1 < prev.depth && !prev.frame_exit)
                fail(Kind::DepthJump,
                    at_line(line_no) + "depth drops by more than one without a frameExit marker");
        }
        trace.steps.push_back(std::move(step));
    }
    return trace;
}

void append_step(std::string& out, const TraceStep& s)
{
    out += "{\"pc\":";
    out += std::to_string(s.pc);
    out += ",\"op\":\"";
    out += name(s.op);
    out += "\",\"depth\":";
    out += std::to_string(s.depth);
    out += ",\"gas\":";
    out += std::to_string(s.gas);
    out += ",\"stack\":[";
    for (size_t i = 0; i < s.stack.size(); ++i)
    {
        if (i != 0)
            out += ',';
        out += '"';
        out += s.stack[i].to_hex();
        out += '"';
    }
    out += ']';
    if (s.frame_exit)
        out += ",\"frameExit\":true";
    out += "}\n";
}

}  // namespace

std::string_view to_string(TraceError::Kind kind) noexcept
{
    switch (kind)
    {
    case Kind::MalformedTrace:
        return "MalformedTrace";
    case Kind::SchemaViolation:
        return "SchemaViolation";
    case Kind::DepthJump:
        return "DepthJump";
    case Kind::MixedBlocks:
        return "MixedBlocks";
    case Kind::DuplicateTxIndex:
        return "DuplicateTxIndex";
    }
    return "Unknown";
}

ExecutionTrace parse_trace(std::string_view contents)
{
    const auto lines = split_lines(contents);
    return parse_trace_lines(lines, 0, lines.size(), 0);
}

BlockContext parse_block(std::string_view contents)
{
    const auto lines = split_lines(contents);
    size_t i = 0;
    while (i < lines.size() && is_blank(lines[i]))
        ++i;
    if (i == lines.size())
        fail(Kind::MalformedTrace, "block file has no metadata line");

    BlockContext block;
    {
        const auto header = parse_json_line(lines[i], i + 1);
        block.block_number = require_uint(header, "blockNumber", i + 1);
    }
    ++i;

    std::set<uint64_t> seen;
    size_t chunk_start = i;
    auto flush = [&](size_t chunk_end) {
        bool empty = true;
        for (size_t k = chunk_start; k < chunk_end; ++k)
            empty = empty && is_blank(lines[k]);
        if (empty)
            return;
        auto trace = parse_trace_lines(lines, chunk_start, chunk_end, 0);
        if (trace.tx.block_number != block.block_number)
            fail(Kind::MixedBlocks, "transaction " + std::to_string(trace.tx.tx_index) +
                                        " belongs to block " +
                                        std::to_string(trace.tx.block_number) + ", expected " +
                                        std::to_string(block.block_number));
        if (!seen.insert(trace.tx.tx_index).second)
            fail(Kind::DuplicateTxIndex,
                "txIndex " + std::to_string(trace.tx.tx_index) + " appears more than once");
        block.transactions.push_back(std::move(trace));
    };
    for (; i < lines.size(); ++i)
    {
        if (lines[i] == "---")
        {
            flush(i);
            chunk_start = i + 1;
        }
    }
    flush(lines.size());

    std::sort(block.transactions.begin(), block.transactions.end(),
        [](const auto& a, const auto& b) { return a.tx.tx_index < b.tx.tx_index; });
    return block;
}

std::string serialize_trace(const ExecutionTrace& trace)
{
    nlohmann::ordered_json meta;
    meta["blockNumber"] = trace.tx.block_number;
    meta["txIndex"] = trace.tx.tx_index;
    meta["sender"] = trace.tx.sender.to_hex();
    meta["callee"] = trace.tx.callee.to_hex();
    meta["value"] = to_string(trace.tx.value);
    auto& balances = meta["preBalances"] = nlohmann::ordered_json::object();
    for (const auto& [addr, amount] : trace.tx.pre_balances)
        balances[addr.to_hex()] = to_string(amount);
    meta["status"] = trace.tx.status == TxStatus::success ? "success" : "reverted";

    std::string out = meta.dump();
    out += '\n';
    out.reserve(out.size() + trace.steps.size() * 96);
    for (const auto& s : trace.steps)
        append_step(out, s);
    return out;
}

std::string serialize_block(const BlockContext& block)
{
    nlohmann::ordered_json header;
    header["blockNumber"] = block.block_number;
    std::string out = header.dump();
    out += '\n';
    for (const auto& t : block.transactions)
    {
        out += "---\n";
        out += serialize_trace(t);
    }
    return out;
}

bool looks_like_block(std::string_view contents)
{
    const auto nl = contents.find('\n');
    const auto first = contents.substr(0, nl);
    try
    {
        const auto j = json::parse(first);
        return j.is_object() && j.contains("blockNumber") && !j.contains("txIndex");
    }
    catch (const json::parse_error&)
    {
        return false;
    }
}

}  // namespace tracescan
