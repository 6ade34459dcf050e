package ledger

type Batcher interface {
	SetHeader(h *BatchHeader)
	Validate() error
}

type canValidate interface {
	Validate() error
}
