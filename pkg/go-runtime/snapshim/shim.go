// Package snapshim is the logging hook the instrumenter injects into source
// projects: it records one JSON line per function call (canonical inputs at
// entry, extended outputs at exit) into the file named by SNAPSHOT_PATH.
package snapshim

import (
	"fmt"
	"os"
	"strings"
	"sync"
)

var (
	mu       sync.Mutex
	out      *os.File
	current  string
	disabled bool
)

// Call carries one in-flight invocation: the inputs are serialized at entry
// time so later mutation cannot leak into them.
type Call struct {
	ID     string
	Test   string
	Inputs []string
	Bad    bool
}

// Enter serializes the inputs immediately and returns the call handle.
func Enter(id string, inputs ...any) *Call {
	c := &Call{ID: id, Test: currentTest()}
	for _, in := range inputs {
		enc, err := Encode(in)
		if err != nil {
			// unsupported value (function/channel): drop the record loudly
			fmt.Fprintf(os.Stderr, "snapshim: skipping %s: %v\n", id, err)
			c.Bad = true
			return c
		}
		c.Inputs = append(c.Inputs, enc)
	}
	return c
}

// Exit appends the snapshot line: outputs are the returns, then the receiver
// post-state and pointer-argument post-states handed in by the instrumenter.
func Exit(c *Call, returns []any, posts []any, err error) {
	if c == nil || c.Bad {
		return
	}
	outputs := make([]string, 0, len(returns)+len(posts))
	for _, v := range append(append([]any{}, returns...), posts...) {
		enc, encErr := Encode(v)
		if encErr != nil {
			fmt.Fprintf(os.Stderr, "snapshim: skipping %s: %v\n", c.ID, encErr)
			return
		}
		outputs = append(outputs, enc)
	}
	flag := "false"
	msg := `""`
	if err != nil {
		flag = "true"
		msg = escapeString(err.Error())
	}
	var b strings.Builder
	b.WriteString(`{"err":{"flag":`)
	b.WriteString(flag)
	b.WriteString(`,"msg":`)
	b.WriteString(msg)
	b.WriteString(`},"id":`)
	b.WriteString(escapeString(c.ID))
	b.WriteString(`,"in":[`)
	b.WriteString(strings.Join(c.Inputs, ","))
	b.WriteString(`],"out":[`)
	b.WriteString(strings.Join(outputs, ","))
	b.WriteString(`],"test":`)
	b.WriteString(escapeString(c.Test))
	b.WriteString("}\n")
	appendLine(b.String())
}

// Init records a global variable's forced value and passes it through.
func Init[T any](id string, v T) T {
	c := &Call{ID: id, Test: currentTest()}
	Exit(c, []any{v}, nil, nil)
	return v
}

// Test marks the currently running test; the returned func restores the
// previous marker (use with defer).
func Test(name string) func() {
	mu.Lock()
	prev := current
	current = name
	mu.Unlock()
	return func() {
		mu.Lock()
		current = prev
		mu.Unlock()
	}
}

func currentTest() string {
	mu.Lock()
	defer mu.Unlock()
	return current
}

// appendLine writes one complete record under the lock, so parallel test
// writers never interleave partial lines. Logging failures abort the run.
func appendLine(line string) {
	mu.Lock()
	defer mu.Unlock()
	if disabled {
		return
	}
	if out == nil {
		path := os.Getenv("SNAPSHOT_PATH")
		if path == "" {
			disabled = true
			return
		}
		f, err := os.OpenFile(path, os.O_CREATE|os.O_WRONLY|os.O_APPEND, 0o644)
		if err != nil {
			panic(fmt.Sprintf("snapshim: cannot open snapshot file: %v", err))
		}
		out = f
	}
	if _, err := out.WriteString(line); err != nil {
		panic(fmt.Sprintf("snapshim: write failed: %v", err))
	}
}

// resetForTest reopens the snapshot sink (test support).
func resetForTest() {
	mu.Lock()
	defer mu.Unlock()
	if out != nil {
		out.Close()
		out = nil
	}
	disabled = false
	current = ""
}
