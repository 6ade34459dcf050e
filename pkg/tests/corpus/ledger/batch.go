package ledger

import "fmt"

func newBatch(limit int) *Batch {
	return &Batch{Limit: limit}
}

func (b *Batch) SetHeader(h *BatchHeader) {
	b.Header = &BatchHeader{Company: h.Company, Code: h.Code}
}

func (b *Batch) AddEntry(amount int) {
	b.Entries = append(b.Entries, amount)
}

func (b *Batch) EntryCount() int {
	return len(b.Entries)
}

func (b *Batch) Total() int {
	return sumEntries(b.Entries)
}

func (b *Batch) OverLimit() bool {
	return b.Total() > b.Limit
}

func (b *Batch) Validate() error {
	if b.Header == nil {
		return &BatchError{Code: 1, Op: "header"}
	}
	if b.EntryCount() == 0 {
		return &BatchError{Code: 2, Op: "entries"}
	}
	if b.OverLimit() {
		return fmt.Errorf("total %d over limit %d", b.Total(), b.Limit)
	}
	return nil
}
