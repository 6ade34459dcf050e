package ledger

import "testing"

func TestValidate(t *testing.T) {
	entry := &EntryDetail{Addenda05: []int{7, 42}, TraceId: "t-1"}
	if !Validate(entry, 2) {
		t.Errorf("expected valid")
	}
	if Validate(entry, 3) {
		t.Errorf("length mismatch must fail")
	}
	empty := &EntryDetail{TraceId: "t-2"}
	if Validate(empty, 0) {
		t.Errorf("nil addenda must fail")
	}
	noMatch := &EntryDetail{Addenda05: []int{1, 2}, TraceId: "t-3"}
	if Validate(noMatch, 2) {
		t.Errorf("no special number must fail")
	}
	withZero := &EntryDetail{Addenda05: []int{0, 42}, TraceId: "t-4"}
	if !Validate(withZero, 2) {
		t.Errorf("zero entries are present entries")
	}
}

func TestSums(t *testing.T) {
	if sumEntries([]int{1, 2, 3}) != 6 {
		t.Errorf("bad sum")
	}
	if sumEntries(nil) != 0 {
		t.Errorf("nil sums to zero")
	}
	if v, err := maxEntry([]int{5, 9, 3}); err != nil || v != 9 {
		t.Errorf("bad max")
	}
	if _, err := maxEntry(nil); err == nil {
		t.Errorf("empty max must error")
	}
	if i, err := firstOverLimit([]int{1, 8, 2}, 5); err != nil || i != 1 {
		t.Errorf("bad first over limit")
	}
	if _, err := firstOverLimit([]int{1, 2}, 5); err == nil {
		t.Errorf("must report none over limit")
	}
}

func TestAmounts(t *testing.T) {
	if err := checkAmount(120); err != nil {
		t.Errorf("120 is fine")
	}
	if err := checkAmount(-3); err == nil {
		t.Errorf("negative must fail")
	}
	if err := checkAmount(100000); err == nil {
		t.Errorf("ceiling must fail")
	}
	if s, err := describeAmount(55); err != nil || s != "amount 55 ok" {
		t.Errorf("bad description %q", s)
	}
	if _, err := describeAmount(-1); err == nil {
		t.Errorf("negative description must fail")
	}
}

func TestBatchLifecycle(t *testing.T) {
	b := newBatch(100)
	if err := ValidateAll(b); err == nil {
		t.Errorf("headerless batch must fail")
	}
	b.SetHeader(&BatchHeader{Company: "acme", Code: 220})
	if err := ValidateAll(b); err == nil {
		t.Errorf("empty batch must fail")
	}
	b.AddEntry(40)
	b.AddEntry(30)
	if b.EntryCount() != 2 {
		t.Errorf("bad count")
	}
	if b.Total() != 70 {
		t.Errorf("bad total")
	}
	if b.OverLimit() {
		t.Errorf("70 <= 100")
	}
	if err := ValidateAll(b); err != nil {
		t.Errorf("valid batch rejected: %v", err)
	}
	b.AddEntry(50)
	if !b.OverLimit() {
		t.Errorf("120 > 100")
	}
	if err := ValidateAll(b); err == nil {
		t.Errorf("over-limit batch must fail")
	}
}

func TestSpecialNumber(t *testing.T) {
	if specialNumber != 42 {
		t.Errorf("unexpected special number")
	}
	if setupSpecialNumber() != 42 {
		t.Errorf("setup mismatch")
	}
}

func TestCustomError(t *testing.T) {
	e := &BatchError{Code: 9, Op: "probe"}
	if e.Error() != "batch probe failed with code 9" {
		t.Errorf("bad message %q", e.Error())
	}
}
