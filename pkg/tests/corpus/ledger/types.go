package ledger

type EntryDetail struct {
	Addenda05 []int
	TraceId   string
}

type BatchHeader struct {
	Company string
	Code    int
}

type Batch struct {
	Header  *BatchHeader
	Entries []int
	Limit   int
}
