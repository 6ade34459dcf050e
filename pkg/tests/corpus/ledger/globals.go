package ledger

var specialNumber int = setupSpecialNumber()

func setupSpecialNumber() int {
	base := 40
	bonus := 2
	return base + bonus
}
