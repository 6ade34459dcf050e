// Package oracle serves original source functions over a local TCP socket:
// one JSON request line in ({"id":..., "in":[...]}), one reply line out
// ({"out":[...], "err":{"flag":..., "msg":...}}), one request per
// connection round-trip. Registrations are generated by the instrumenter.
package oracle

import (
	"bufio"
	"encoding/json"
	"fmt"
	"net"
	"strings"

	"rustport.local/goruntime/snapshim"
)

// Raw is one undecoded input slot.
type Raw = json.RawMessage

// Handler decodes inputs, runs the original function, and returns the
// extended outputs (returns, receiver post-state, pointer-arg post-states).
type Handler func(in []Raw) ([]any, error)

type request struct {
	ID string `json:"id"`
	In []Raw  `json:"in"`
}

// MustDecode panics on undecodable input; Serve turns the panic into an
// in-band InputDecodeError reply.
func MustDecode(raw Raw, target any) {
	if err := json.Unmarshal(raw, target); err != nil {
		panic(decodeError{fmt.Sprintf("InputDecodeError: %v", err)})
	}
}

type decodeError struct{ msg string }

// Options tune the server; handling stays sequential except for fragments
// the registrations explicitly mark pure.
type Options struct {
	Pure map[string]bool
}

// Serve accepts connections until the listener fails; it never crashes on
// bad input, every failure is an in-band reply.
func Serve(handlers map[string]Handler, addr string) error {
	return ServeOpts(handlers, addr, Options{})
}

func ServeOpts(handlers map[string]Handler, addr string, opts Options) error {
	if addr == "" {
		addr = "127.0.0.1:9167"
	}
	ln, err := net.Listen("tcp", addr)
	if err != nil {
		return err
	}
	for {
		conn, err := ln.Accept()
		if err != nil {
			return err
		}
		line, rerr := bufio.NewReader(conn).ReadString('\n')
		if rerr != nil && line == "" {
			conn.Close()
			continue
		}
		line = strings.TrimSpace(line)
		if opts.Pure[requestID(line)] {
			go respond(conn, line, handlers)
		} else {
			respond(conn, line, handlers)
		}
	}
}

func requestID(line string) string {
	var req request
	if json.Unmarshal([]byte(line), &req) != nil {
		return ""
	}
	return req.ID
}

func respond(conn net.Conn, line string, handlers map[string]Handler) {
	defer conn.Close()
	fmt.Fprintln(conn, answer(line, handlers))
}

func answer(line string, handlers map[string]Handler) string {
	var req request
	if err := json.Unmarshal([]byte(line), &req); err != nil {
		return errorReply(fmt.Sprintf("InputDecodeError: %v", err))
	}
	handler, ok := handlers[req.ID]
	if !ok {
		return errorReply(fmt.Sprintf("UnknownFragment: %s", req.ID))
	}
	outputs, err := safeCall(handler, req.In)
	if derr, isDecode := err.(decodeErrWrap); isDecode {
		return errorReply(derr.msg)
	}
	encoded := make([]string, 0, len(outputs))
	for _, v := range outputs {
		enc, encErr := snapshim.Encode(v)
		if encErr != nil {
			return errorReply(fmt.Sprintf("EncodeError: %v", encErr))
		}
		encoded = append(encoded, enc)
	}
	flag := "false"
	msg := `""`
	if err != nil {
		flag = "true"
		msg, _ = snapshim.Encode(err.Error())
	}
	return fmt.Sprintf(`{"err":{"flag":%s,"msg":%s},"out":[%s]}`, flag, msg, strings.Join(encoded, ","))
}

func errorReply(msg string) string {
	enc, _ := snapshim.Encode(msg)
	return fmt.Sprintf(`{"err":{"flag":true,"msg":%s},"out":[]}`, enc)
}

type decodeErrWrap struct{ msg string }

func (d decodeErrWrap) Error() string { return d.msg }

// safeCall recovers handler panics: decode panics become in-band decode
// errors, anything else an in-band handler error.
func safeCall(h Handler, in []Raw) (outputs []any, err error) {
	defer func() {
		if r := recover(); r != nil {
			if d, ok := r.(decodeError); ok {
				err = decodeErrWrap{d.msg}
				return
			}
			err = fmt.Errorf("handler panic: %v", r)
		}
	}()
	return h(in)
}
