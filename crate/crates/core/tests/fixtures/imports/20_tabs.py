if True:
	import select
	from signal import SIGINT, SIGTERM
