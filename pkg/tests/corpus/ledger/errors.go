package ledger

import "fmt"

type BatchError struct {
	Code int
	Op   string
}

func (e *BatchError) Error() string {
	return fmt.Sprintf("batch %s failed with code %d", e.Op, e.Code)
}
